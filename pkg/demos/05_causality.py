"""Does the oscillation follow the inverter's output?

Two days of 30 sps data with a mode that is present only while the plant
injects power.  Five-minute band energies are compared with window-mean
P, |Q| and PF.
"""

from gridosc.energy import correlate_energy_power, window_means
from gridosc.ingest import ChannelKind
from gridosc.spectral import band_energy_series
from gridosc.synth import SynthScenario, channel_id, gen_network, snr_amplitude

HOUR = 3600.0
sc = SynthScenario(
    n_substations=1, f0_hz=22.0, amplitude0=snr_amplitude(10, 1e-6), noise_variance=1e-6,
    rates=[30.0], duration_s=48 * HOUR, t0=1593576000.0, seed=3, emit_current=False,
    gate=[(6 * HOUR, 20 * HOUR), (30 * HOUR, 44 * HOUR)],
)
chs, _ = gen_network(sc)

# the 22 Hz mode folds to 8 Hz at 30 sps
energy = band_energy_series(chs[channel_id("SUB00", ChannelKind.VPHM, 30.0)], (7.5, 8.5), 300.0)
drivers = [window_means(chs[channel_id("SUB00", k, 30.0)], energy.times, 300.0)
           for k in (ChannelKind.P, ChannelKind.Q, ChannelKind.PF)]
rep = correlate_energy_power(energy, *drivers)

print(f"{len(energy)} five-minute windows, {rep.n_on} with P > 0")
for name, r in rep.pearson_r.items():
    print(f"  r(E, {name:3s}) = {r:.3f}")
print(f"mean energy ON/OFF = {rep.mean_on:.3g} / {rep.mean_off:.3g} (ratio {rep.mean_ratio:.0f})")
