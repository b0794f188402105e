"""A 22 Hz oscillation seen through 30 sps, 60 sps and point-on-wave eyes.

Each reporting rate folds the tone to its own apparent frequency.  Taken
together the observations pin the true frequency down.
"""

from gridosc.aliasing import AliasObservation, alias_of, resolve_candidates

TRUE_HZ = 22.0

for fs in (30.0, 60.0, 960.0):
    print(f"{TRUE_HZ:g} Hz sampled at {fs:g} sps appears at {alias_of(TRUE_HZ, fs):g} Hz")

# With only the 30 sps PMU, anything in {8, 22, 38, ...} could be the source.
steps = [
    [AliasObservation(8.0, 30.0)],
    [AliasObservation(8.0, 30.0), AliasObservation(22.0, 60.0)],
    [AliasObservation(8.0, 30.0), AliasObservation(22.0, 60.0), AliasObservation(22.0, 960.0)],
]
for obs in steps:
    rates = ", ".join(f"{o.fs_hz:g}" for o in obs)
    cands = resolve_candidates(obs, f_max=50.0)
    print(f"rates [{rates}] -> candidates {[round(c.freq_hz, 3) for c in cands]}")
