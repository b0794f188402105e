"""Mode multiplicity, mode frequency and mode shape from spectral estimates.

Multiplicity uses frequency domain decomposition: the CSD matrix at every bin
is decomposed by SVD and the leading singular values are inspected as curves
over frequency.  A single mode shows one dominant curve; two modes sharing a
frequency lift the second curve as well, with a different singular vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import ParameterError, ShapeReferenceError
from .spectral import CsdStack, PsdEstimate, _readonly

DEFAULT_PROMINENCE_DB = 6.0
DEFAULT_COINCIDE_BINS = 2
PARALLEL_LIMIT = 0.9


@dataclass(frozen=True, eq=False)
class SingularCurves:
    freqs: np.ndarray
    sigma: np.ndarray      # (n_freqs, m), descending along axis 1
    vectors: np.ndarray    # (n_freqs, m, n_channels), unit norm
    channel_ids: tuple[str, ...]
    resolution_hz: float

    def __post_init__(self):
        object.__setattr__(self, "freqs", _readonly(self.freqs))
        object.__setattr__(self, "sigma", _readonly(self.sigma))
        object.__setattr__(self, "vectors", _readonly(self.vectors, complex))
        object.__setattr__(self, "channel_ids", tuple(self.channel_ids))

    @property
    def m(self) -> int:
        return self.sigma.shape[1]

    def to_csv(self) -> str:
        head = "freq_hz," + ",".join(f"sigma{k + 1}" for k in range(self.m))
        rows = [
            repr(f) + "," + ",".join(repr(v) for v in row)
            for f, row in zip(self.freqs.tolist(), self.sigma.tolist())
        ]
        return "\n".join([head] + rows) + "\n"


@dataclass(frozen=True, eq=False)
class ModeShape:
    """Complex per-channel shape; reference phase 0, largest magnitude 1.

    Positive phase means the channel leads the reference.
    """

    mode_freq_hz: float
    reference_id: str
    channel_ids: tuple[str, ...]
    entries: np.ndarray
    method: str = "fdd"

    def __post_init__(self):
        object.__setattr__(self, "channel_ids", tuple(self.channel_ids))
        object.__setattr__(self, "entries", _readonly(self.entries, complex))

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.entries)

    @property
    def phases(self) -> np.ndarray:
        """Phases in (-pi, pi]."""
        ph = np.angle(self.entries)
        return np.where(ph <= -np.pi, np.pi, ph)

    def entry(self, channel_id: str) -> complex:
        return complex(self.entries[self.channel_ids.index(channel_id)])

    def to_csv(self) -> str:
        lines = [
            f"# mode_freq_hz={self.mode_freq_hz!r}",
            f"# reference={self.reference_id}",
            f"# method={self.method}",
            "# phase convention: positive phase_rad leads the reference",
            "id,magnitude,phase_rad",
        ]
        for cid, mag, ph in zip(self.channel_ids, self.magnitudes.tolist(), self.phases.tolist()):
            lines.append(f"{cid},{mag!r},{ph!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DetectedMode:
    freq_hz: float
    curve: int
    sigma: float
    shape: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MultiplicityReport:
    modes: tuple[DetectedMode, ...]
    prominence_ratio: float
    coincide_tol_hz: float

    @property
    def count(self) -> int:
        return len(self.modes)

    @property
    def freqs(self) -> list[float]:
        return [m.freq_hz for m in self.modes]


def fdd_curves(csd: CsdStack, band_hz: tuple[float, float] | None = None, m: int = 3) -> SingularCurves:
    """Top-``m`` singular values and vectors of each CSD matrix in the band."""
    n = len(csd.channel_ids)
    if m < 1 or m > n:
        raise ParameterError(f"m must lie in [1, {n}] for {n} channels, got {m}")
    if band_hz is None:
        mask = np.ones(csd.freqs.size, bool)
    else:
        lo, hi = band_hz
        if lo >= hi or lo < csd.freqs[0] or hi > csd.freqs[-1]:
            raise ParameterError(
                f"band ({lo}, {hi}) Hz not inside CSD range [{csd.freqs[0]}, {csd.freqs[-1]}]"
            )
        mask = (csd.freqs >= lo) & (csd.freqs <= hi)
        if not mask.any():
            raise ParameterError(f"band ({lo}, {hi}) Hz holds no CSD bin")
    u, s, _ = np.linalg.svd(csd.matrices[mask], hermitian=True)
    vecs = np.swapaxes(u[:, :, :m], 1, 2)
    return SingularCurves(csd.freqs[mask], s[:, :m], vecs, csd.channel_ids, csd.resolution_hz)


def _peaks(curve: np.ndarray, ratio: float) -> np.ndarray:
    if not curve.any():
        return np.array([], int)
    med = float(np.median(curve))
    idx, _ = signal.find_peaks(curve, height=ratio * med, prominence=(ratio - 1.0) * med)
    return idx


def _merge_close(idx: np.ndarray, curve: np.ndarray, freqs: np.ndarray, tol: float) -> list[int]:
    """Keep the tallest of any peaks closer than ``tol``."""
    kept: list[int] = []
    for i in sorted(idx, key=lambda j: -curve[j]):
        if all(abs(freqs[i] - freqs[j]) > tol + 1e-12 for j in kept):
            kept.append(int(i))
    return sorted(kept)


def count_modes(
    curves: SingularCurves,
    peak_prominence: float | None = None,
    coincide_tol_hz: float | None = None,
) -> MultiplicityReport:
    """Count distinct modes from singular-value curves.

    ``peak_prominence`` is a linear ratio to the in-band median of a curve
    (default 6 dB, about 3.98).  A peak on curve 0 is a mode.  A second mode
    is declared at that frequency only when curve 1 also peaks within
    ``coincide_tol_hz`` (default two bins) and its singular vector is not
    parallel (|inner product| < 0.9) to curve 0's vector at the first peak.
    """
    ratio = 10 ** (DEFAULT_PROMINENCE_DB / 10) if peak_prominence is None else float(peak_prominence)
    if ratio <= 1:
        raise ParameterError("peak_prominence must exceed 1 (a ratio to the median)")
    df = curves.resolution_hz
    if not math.isfinite(df):
        df = float(np.median(np.diff(curves.freqs))) if curves.freqs.size > 1 else 0.0
    tol = DEFAULT_COINCIDE_BINS * df if coincide_tol_hz is None else coincide_tol_hz
    if curves.freqs.size < 3:
        return MultiplicityReport((), ratio, tol)

    # singular values at round-off level are structural zeros, not spectra
    sig = np.array(curves.sigma)
    sig[sig < sig.max() * len(curves.channel_ids) * np.finfo(float).eps * 16] = 0.0
    modes = []
    p0 = _merge_close(_peaks(sig[:, 0], ratio), sig[:, 0], curves.freqs, tol)
    p1 = _peaks(sig[:, 1], ratio) if curves.m > 1 else np.array([], int)
    for i in p0:
        v0 = curves.vectors[i, 0]
        modes.append(DetectedMode(float(curves.freqs[i]), 0, float(curves.sigma[i, 0]), v0))
        near = [j for j in p1 if abs(curves.freqs[j] - curves.freqs[i]) <= tol + 1e-12]
        for j in near:
            v1 = curves.vectors[j, 1]
            if abs(np.vdot(v0, v1)) < PARALLEL_LIMIT:
                modes.append(DetectedMode(float(curves.freqs[j]), 1, float(curves.sigma[j, 1]), v1))
                break
    return MultiplicityReport(tuple(modes), ratio, tol)


def estimate_mode_frequency(psd: PsdEstimate, band_hz: tuple[float, float]) -> float | None:
    """Peak frequency in ``band_hz`` refined by a log-parabola, or None.

    None means the density is flat in the band (max/min < 1.1), i.e. there
    is no mode to report.
    """
    lo, hi = band_hz
    if lo >= hi or lo < psd.freqs[0] or hi > psd.freqs[-1]:
        raise ParameterError(f"band ({lo}, {hi}) Hz outside PSD range [{psd.freqs[0]}, {psd.freqs[-1]}]")
    idx = np.flatnonzero((psd.freqs >= lo) & (psd.freqs <= hi))
    if idx.size == 0:
        raise ParameterError(f"band ({lo}, {hi}) Hz holds no PSD bin")
    d = psd.density[idx]
    dmin = float(d.min())
    dmax = float(d.max())
    if dmax <= 0 or (dmin > 0 and dmax / dmin < 1.1):
        return None
    k = int(np.argmax(d))
    f_peak = float(psd.freqs[idx[k]])
    if k == 0 or k == idx.size - 1:
        return f_peak
    left, mid, right = d[k - 1], d[k], d[k + 1]
    # line spectra (exact-bin tones) leave neighbours at round-off level
    if min(left, right) <= mid * 1e-12:
        return f_peak
    la, lb, lc = np.log([left, mid, right])
    denom = la - 2 * lb + lc
    if denom >= 0:
        return f_peak
    offset = 0.5 * (la - lc) / denom
    step = float(psd.freqs[idx[k] + 1] - psd.freqs[idx[k]])
    return float(f_peak + offset * step)


def _normalize_shape(vec: np.ndarray, ref: int, reference_id: str) -> np.ndarray:
    mags = np.abs(vec)
    top = mags.max()
    if top == 0 or mags[ref] < 1e-6 * top:
        raise ShapeReferenceError(
            f"reference {reference_id!r} carries almost no mode energy; pick another reference"
        )
    rot = np.conj(vec[ref]) / mags[ref]
    out = vec * rot / top
    out[ref] = mags[ref] / top
    return out


def mode_shape(csd: CsdStack, f0: float, reference_id: str, method: str = "fdd") -> ModeShape:
    """Mode shape at the CSD bin nearest ``f0``.

    ``method="fdd"`` takes the first singular vector; ``method="cross"`` uses
    the cross-spectra ``S[ref, k]`` against the reference channel.
    """
    if not csd.freqs[0] <= f0 <= csd.freqs[-1]:
        raise ParameterError(f"f0 = {f0} Hz outside CSD range [{csd.freqs[0]}, {csd.freqs[-1]}]")
    ref = csd.index(reference_id)
    k = csd.nearest_bin(f0)
    S = csd.matrices[k]
    if method == "fdd":
        u, _, _ = np.linalg.svd(S, hermitian=True)
        # S = E[conj(X) X^T], so the singular vector is conj of the amplitudes
        vec = np.conj(u[:, 0])
    elif method == "cross":
        vec = np.array(S[ref, :])
    else:
        raise ParameterError(f"unknown mode-shape method {method!r}")
    entries = _normalize_shape(vec, ref, reference_id)
    return ModeShape(float(csd.freqs[k]), reference_id, csd.channel_ids, entries, method)
