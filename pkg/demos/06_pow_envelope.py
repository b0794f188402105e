"""Point-on-wave confirmation: demodulate a 960 Hz waveform.

An amplitude modulation at the mode frequency rides on the 60 Hz carrier.
The Hilbert envelope brings it down to baseband, where the PSD shows it at
its true frequency with no aliasing in the way.
"""

import numpy as np

from gridosc.spectral import hilbert_envelope, welch_psd
from gridosc.synth import gen_pow

for depth in (0.0, 0.01, 0.02):
    wave = gen_pow(30.0, fs=960.0, mod_freq_hz=22.0, mod_depth=depth, seed=1)
    psd = welch_psd(hilbert_envelope(wave, carrier_hz=60.0), segment_len_s=10.0)
    band = (psd.freqs > 1) & (psd.freqs < 60)
    k = np.flatnonzero(band)[np.argmax(psd.density[band])]
    contrast = psd.density[k] / np.median(psd.density[band])
    print(f"depth {depth:4.2f}: envelope peak {psd.freqs[k]:6.2f} Hz, {10 * np.log10(contrast):5.1f} dB above median")
