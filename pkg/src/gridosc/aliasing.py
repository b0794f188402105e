"""Alias folding and multi-rate true-frequency resolution.

A tone at ``f`` sampled at ``fs`` shows up at ``alias_of(f, fs)`` in
``[0, fs/2]``.  Given peaks observed at several reporting rates,
:func:`resolve_true_frequency` lists every physical frequency up to a search
ceiling that is consistent with all of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

DEFAULT_TOLERANCE_HZ = 0.1
DEFAULT_FMAX_HZ = 100.0


@dataclass(frozen=True)
class AliasObservation:
    f_obs_hz: float
    fs_hz: float
    tolerance_hz: float = DEFAULT_TOLERANCE_HZ

    def __post_init__(self):
        if not self.fs_hz > 0:
            raise ParameterError(f"sampling rate must be positive, got {self.fs_hz}")
        if not self.tolerance_hz > 0:
            raise ParameterError(f"tolerance must be positive, got {self.tolerance_hz}")
        if not 0 <= self.f_obs_hz <= self.fs_hz / 2:
            raise ParameterError(
                f"observed {self.f_obs_hz} Hz lies outside [0, {self.fs_hz / 2}] at {self.fs_hz} sps"
            )

    @classmethod
    def parse(cls, text: str, default_tol: float = DEFAULT_TOLERANCE_HZ) -> "AliasObservation":
        """Parse ``f:fs`` or ``f:fs:tol``."""
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ParameterError(f"observation must be f:fs[:tol], got {text!r}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ParameterError(f"non-numeric observation {text!r}") from None
        return cls(vals[0], vals[1], vals[2] if len(vals) == 3 else default_tol)


@dataclass(frozen=True)
class Candidate:
    freq_hz: float
    residuals_hz: tuple[float, ...]
    interval_hz: tuple[float, float] = (math.nan, math.nan)

    @property
    def worst_residual(self) -> float:
        return max(self.residuals_hz)


def alias_of(f_true: float, fs: float) -> float:
    """Apparent frequency of a tone at ``f_true`` sampled at ``fs``."""
    if f_true < 0:
        raise ParameterError(f"frequency must be non-negative, got {f_true}")
    if not fs > 0:
        raise ParameterError(f"sampling rate must be positive, got {fs}")
    half = fs / 2.0
    return abs(math.fmod(f_true + half, fs) - half)


def _unalias_points(obs: AliasObservation, f_max: float) -> list[float]:
    """Every k*fs +/- f_obs that could lie within tolerance of [0, f_max]."""
    out = []
    k = 0
    while k * obs.fs_hz - obs.f_obs_hz <= f_max + obs.tolerance_hz:
        out.extend((k * obs.fs_hz - obs.f_obs_hz, k * obs.fs_hz + obs.f_obs_hz))
        k += 1
    return sorted(set(out))


def _union(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


def _intersect(a: list[tuple[float, float]], b: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo, hi = max(a[i][0], b[j][0]), min(a[i][1], b[j][1])
        if lo <= hi:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def feasible_intervals(obs: list[AliasObservation], f_max: float = DEFAULT_FMAX_HZ) -> list[tuple[float, float]]:
    """Closed intervals of true frequency in [0, f_max] consistent with every observation.

    ``|alias_of(f, fs) - f_obs| <= tol`` holds exactly when ``f`` is within
    ``tol`` of some ``k*fs +/- f_obs``, so each observation admits a union of
    intervals and the answer is their intersection.
    """
    if not obs:
        raise ParameterError("at least one alias observation is required")
    if not f_max > 0:
        raise ParameterError(f"f_max must be positive, got {f_max}")
    region = [(0.0, float(f_max))]
    for o in obs:
        pieces = [(max(u - o.tolerance_hz, 0.0), min(u + o.tolerance_hz, f_max))
                  for u in _unalias_points(o, f_max)]
        region = _intersect(region, _union([p for p in pieces if p[0] <= p[1]]))
    return region


def _residuals(f: float, obs: list[AliasObservation]) -> tuple[float, ...]:
    return tuple(abs(alias_of(f, o.fs_hz) - o.f_obs_hz) for o in obs)


def _best_point(lo: float, hi: float, obs: list[AliasObservation], f_max: float) -> Candidate:
    # worst residual is a max of V shapes centred on unalias points, so its
    # minimum sits at an endpoint, a centre, or midway between two centres
    centres = sorted({u for o in obs for u in _unalias_points(o, f_max)
                      if lo - o.tolerance_hz <= u <= hi + o.tolerance_hz})
    trial = {lo, hi, *centres, *((x + y) / 2 for i, x in enumerate(centres) for y in centres[i + 1 :])}
    trial = [f for f in trial if lo <= f <= hi]
    best = min(trial, key=lambda f: (max(_residuals(f, obs)), f))
    return Candidate(float(best), _residuals(best, obs), (lo, hi))


def resolve_candidates(obs: list[AliasObservation], f_max: float = DEFAULT_FMAX_HZ) -> list[Candidate]:
    """Consistent true frequencies with their per-observation residuals.

    One candidate per feasible interval; intervals closer than the smallest
    tolerance are merged, keeping the point with the smallest worst residual.
    """
    region = feasible_intervals(obs, f_max)
    merge_tol = min(o.tolerance_hz for o in obs)
    groups: list[list[tuple[float, float]]] = []
    for iv in region:
        if groups and iv[0] - groups[-1][-1][1] <= merge_tol:
            groups[-1].append(iv)
        else:
            groups.append([iv])
    out = []
    for g in groups:
        best = min((_best_point(lo, hi, obs, f_max) for lo, hi in g),
                   key=lambda c: (c.worst_residual, c.freq_hz))
        out.append(Candidate(best.freq_hz, best.residuals_hz, (g[0][0], g[-1][1])))
    return out


def resolve_true_frequency(obs: list[AliasObservation], f_max: float = DEFAULT_FMAX_HZ) -> list[float]:
    """Sorted candidate true frequencies consistent with every observation."""
    return [c.freq_hz for c in resolve_candidates(obs, f_max)]
