"""Windowed spectral estimators for phasor and point-on-wave channels.

All densities are one-sided (unit^2/Hz).  Every estimator shares the same
segment -> detrend -> taper -> FFT path (:func:`_segment_spectra`), so a
one-segment Welch estimate is bit-identical to the plain periodogram and the
diagonal of a CSD stack is bit-identical to the Welch PSD of that channel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from .errors import DataError, NumericalError, ParameterError, RangeError
from .ingest import ChannelKind, ChannelSet, PhasorChannel

DetrendMode = Literal["none", "mean", "linear"]
WindowName = Literal["hann", "rectangular"]

# rows per FFT batch in spectrogram(); bounds peak memory on multi-day records
_ROW_CHUNK = 128


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class WelchConfig:
    segment_len_s: float = 60.0
    overlap_frac: float = 0.5
    window: WindowName = "hann"
    detrend_mode: DetrendMode = "linear"


PRESETS: dict[str, WelchConfig] = {
    "default": WelchConfig(),
    # 1-min segments, no overlap, plain FFT: the system-wide survey setup
    "paper-survey": WelchConfig(60.0, 0.0, "rectangular", "linear"),
}


@dataclass(frozen=True, eq=False)
class PsdEstimate:
    freqs: np.ndarray
    density: np.ndarray
    method: str
    resolution_hz: float
    source_channel: str
    n_segments: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "freqs", _readonly(self.freqs))
        object.__setattr__(self, "density", _readonly(self.density))
        if self.freqs.shape != self.density.shape:
            raise ParameterError("freqs and density lengths differ")

    @property
    def df(self) -> float:
        return self.resolution_hz

    def band(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        m = (self.freqs >= lo) & (self.freqs <= hi)
        return self.freqs[m], self.density[m]

    def scaled(self, c: float) -> "PsdEstimate":
        return PsdEstimate(
            self.freqs, self.density * c, self.method, self.resolution_hz,
            self.source_channel, self.n_segments, dict(self.params),
        )

    def to_dict(self) -> dict:
        return {
            "freqs": self.freqs.tolist(),
            "density": self.density.tolist(),
            "method": self.method,
            "resolution_hz": self.resolution_hz,
            "source_channel": self.source_channel,
            "n_segments": self.n_segments,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "PsdEstimate":
        return cls(**d)

    def to_csv(self) -> str:
        lines = ["freq_hz,density"]
        lines += [f"{f!r},{p!r}" for f, p in zip(self.freqs.tolist(), self.density.tolist())]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class Spectrogram:
    times: np.ndarray
    freqs: np.ndarray
    power: np.ndarray
    window_len_s: float
    hop_s: float
    source_channel: str = ""

    def __post_init__(self):
        for name in ("times", "freqs", "power"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        if self.power.shape != (self.times.size, self.freqs.size):
            raise ParameterError("power matrix shape does not match times x freqs")

    @property
    def df(self) -> float:
        return 1.0 / self.window_len_s

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "freqs": self.freqs.tolist(),
            "power": [[None if np.isnan(v) else v for v in row] for row in self.power.tolist()],
            "window_len_s": self.window_len_s,
            "hop_s": self.hop_s,
            "source_channel": self.source_channel,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        """Header row of frequencies, then one ``time,power...`` row per window."""
        out = ["time_s\\freq_hz," + ",".join(repr(f) for f in self.freqs.tolist())]
        for t, row in zip(self.times.tolist(), self.power.tolist()):
            out.append(repr(t) + "," + ",".join("" if v != v else repr(v) for v in row))
        return "\n".join(out) + "\n"


@dataclass(frozen=True, eq=False)
class CsdStack:
    """Per-frequency Hermitian cross-spectral density matrices.

    ``matrices[k, i, j]`` is the averaged ``conj(X_i) * X_j`` at ``freqs[k]``,
    so a channel delayed by tau relative to channel i shows phase -2*pi*f*tau.
    """

    freqs: np.ndarray
    matrices: np.ndarray
    channel_ids: tuple[str, ...]
    n_segments: int = 1
    resolution_hz: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "freqs", _readonly(self.freqs))
        object.__setattr__(self, "matrices", _readonly(self.matrices, complex))
        object.__setattr__(self, "channel_ids", tuple(self.channel_ids))
        n = len(self.channel_ids)
        if self.matrices.shape != (self.freqs.size, n, n):
            raise ParameterError("CSD matrix stack shape mismatch")

    def index(self, channel_id: str) -> int:
        try:
            return self.channel_ids.index(channel_id)
        except ValueError:
            raise ParameterError(f"channel {channel_id!r} not in CSD stack") from None

    def nearest_bin(self, f: float) -> int:
        return int(np.argmin(np.abs(self.freqs - f)))

    def coherence(self) -> np.ndarray:
        d = np.real(np.einsum("kii->ki", self.matrices))
        denom = np.sqrt(d[:, :, None] * d[:, None, :])
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.abs(self.matrices) ** 2 / denom**2


@dataclass(frozen=True, eq=False)
class BandEnergySeries:
    times: np.ndarray
    energy: np.ndarray
    band_hz: tuple[float, float]
    window_len_s: float
    hop_s: float
    source_channel: str = ""

    def __post_init__(self):
        object.__setattr__(self, "times", _readonly(self.times))
        object.__setattr__(self, "energy", _readonly(self.energy))

    def __len__(self) -> int:
        return self.energy.size


# --------------------------------------------------------------------------
# shared machinery


def _require_finite(x: np.ndarray, what: str):
    if np.isnan(x).any():
        raise DataError(f"{what} contains NaN gaps; select a clean window first")


def _detrend_rows(x: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return x
    if mode == "mean":
        return x - x.mean(axis=-1, keepdims=True)
    if mode == "linear":
        n = x.shape[-1]
        t = np.arange(n, dtype=float) - (n - 1) / 2.0
        xm = x.mean(axis=-1, keepdims=True)
        xc = x - xm
        if n < 2:
            return xc
        slope = (xc @ t) / (t @ t)
        return xc - np.multiply.outer(slope, t) if x.ndim > 1 else xc - slope * t
    raise ParameterError(f"unknown detrend mode {mode!r}")


def _window(name: str, n: int) -> np.ndarray:
    if name == "rectangular":
        return np.ones(n)
    if name == "hann":
        return signal.get_window("hann", n)
    raise ParameterError(f"unknown window {name!r}")


def _onesided_weights(n: int) -> np.ndarray:
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return w


def _segment_spectra(segs: np.ndarray, window: str, detrend_mode: str):
    """FFT of detrended, tapered rows; returns (spectra, density scale, weights)."""
    n = segs.shape[-1]
    w = _window(window, n)
    spectra = np.fft.rfft(_detrend_rows(segs, detrend_mode) * w, axis=-1)
    return spectra, 1.0 / float(w @ w), _onesided_weights(n)


def _density(spectra: np.ndarray, scale: float, fs: float, wts: np.ndarray) -> np.ndarray:
    return np.abs(spectra) ** 2 * scale / fs * wts


def _rfreqs(n: int, fs: float) -> np.ndarray:
    # k * fs / n keeps on-grid frequencies exact (rfftfreq multiplies by 1/(n d))
    return np.arange(n // 2 + 1) * fs / n


def _segments(x: np.ndarray, nper: int, step: int) -> np.ndarray:
    return sliding_window_view(x, nper)[::step]


def _seg_geometry(ch: PhasorChannel, segment_len_s: float, overlap_frac: float):
    if not 0.0 <= overlap_frac < 1.0:
        raise ParameterError(f"overlap_frac must lie in [0, 1), got {overlap_frac}")
    nper = int(round(segment_len_s * ch.rate_sps))
    if nper < 2:
        raise ParameterError(f"segment of {segment_len_s} s holds fewer than 2 samples")
    if len(ch) < nper:
        raise RangeError(
            f"channel {ch.id}: record of {ch.duration:g} s is shorter than the "
            f"required {segment_len_s:g} s segment"
        )
    step = nper - int(round(overlap_frac * nper))
    return nper, max(step, 1)


def detrend(ch: PhasorChannel, mode: DetrendMode = "linear") -> PhasorChannel:
    """Remove the mean or least-squares line from a whole channel."""
    _require_finite(ch.values, f"channel {ch.id}")
    return ch.with_values(_detrend_rows(np.asarray(ch.values, float), mode))


def periodogram(
    ch: PhasorChannel, window: WindowName = "rectangular", detrend_mode: DetrendMode = "linear"
) -> PsdEstimate:
    """Single-window modified periodogram of the whole channel."""
    _require_finite(ch.values, f"channel {ch.id}")
    x = np.asarray(ch.values, float)[None, :]
    spectra, scale, wts = _segment_spectra(x, window, detrend_mode)
    dens = _density(spectra, scale, ch.rate_sps, wts).mean(axis=0)
    n = x.shape[1]
    return PsdEstimate(
        _rfreqs(n, ch.rate_sps), dens, "periodogram", ch.rate_sps / n, ch.id, 1,
        {"window": window, "detrend_mode": detrend_mode},
    )


def welch_psd(
    ch: PhasorChannel,
    segment_len_s: float = 60.0,
    overlap_frac: float = 0.5,
    window: WindowName = "hann",
    detrend_mode: DetrendMode = "linear",
) -> PsdEstimate:
    """Welch average of modified periodograms.

    The density is normalized by the window power, so integrating it over
    frequency returns the signal variance for any taper.  With one segment
    and a rectangular window the result equals :func:`periodogram` exactly.
    """
    _require_finite(ch.values, f"channel {ch.id}")
    nper, step = _seg_geometry(ch, segment_len_s, overlap_frac)
    segs = _segments(np.asarray(ch.values, float), nper, step)
    spectra, scale, wts = _segment_spectra(segs, window, detrend_mode)
    dens = _density(spectra, scale, ch.rate_sps, wts).mean(axis=0)
    method = "welch" if segs.shape[0] > 1 or window != "rectangular" else "periodogram"
    return PsdEstimate(
        _rfreqs(nper, ch.rate_sps), dens, method, ch.rate_sps / nper, ch.id,
        segs.shape[0],
        {"segment_len_s": segment_len_s, "overlap_frac": overlap_frac,
         "window": window, "detrend_mode": detrend_mode},
    )


def welch_preset(ch: PhasorChannel, preset: str | WelchConfig = "default") -> PsdEstimate:
    cfg = PRESETS[preset] if isinstance(preset, str) else preset
    return welch_psd(ch, cfg.segment_len_s, cfg.overlap_frac, cfg.window, cfg.detrend_mode)


def spectrogram(
    ch: PhasorChannel,
    window_len_s: float = 300.0,
    hop_s: float | None = None,
    detrend_mode: DetrendMode = "linear",
    window: WindowName = "hann",
) -> Spectrogram:
    """Sliding-window periodograms; windows holding NaN become all-NaN rows.

    ``hop_s`` defaults to the window length (non-overlapping windows).
    """
    hop_s = window_len_s if hop_s is None else hop_s
    if hop_s <= 0:
        raise ParameterError(f"hop_s must be positive, got {hop_s}")
    nwin = int(round(window_len_s * ch.rate_sps))
    hop = int(round(hop_s * ch.rate_sps))
    if hop < 1:
        raise ParameterError(f"hop of {hop_s} s is shorter than one sample")
    if nwin < 2:
        raise ParameterError(f"window of {window_len_s} s holds fewer than 2 samples")
    if len(ch) < nwin:
        raise RangeError(
            f"channel {ch.id}: record of {ch.duration:g} s is shorter than the "
            f"{window_len_s:g} s window"
        )
    segs = _segments(np.asarray(ch.values, float), nwin, hop)
    nrows = segs.shape[0]
    freqs = _rfreqs(nwin, ch.rate_sps)
    power = np.full((nrows, freqs.size), np.nan)
    bad = np.isnan(segs).any(axis=1)
    good = np.flatnonzero(~bad)
    for start in range(0, good.size, _ROW_CHUNK):
        rows = good[start : start + _ROW_CHUNK]
        spectra, scale, wts = _segment_spectra(segs[rows], window, detrend_mode)
        power[rows] = _density(spectra, scale, ch.rate_sps, wts)
    times = ch.t0 + (np.arange(nrows) * hop + nwin / 2.0) / ch.rate_sps
    return Spectrogram(times, freqs, power, nwin / ch.rate_sps, hop / ch.rate_sps, ch.id)


# --------------------------------------------------------------------------
# autoregressive estimate


def autocorrelation(x: np.ndarray, maxlag: int) -> np.ndarray:
    """Biased autocorrelation r[k] = sum x[n] x[n+k] / N for k = 0..maxlag."""
    x = np.asarray(x, float)
    n = x.size
    return np.array([x[: n - k] @ x[k:] for k in range(maxlag + 1)]) / n


def levinson_durbin(r: np.ndarray, order: int):
    """Solve the Yule-Walker equations by the Levinson-Durbin recursion.

    Returns ``(a, sigma2, k)`` with ``a = [1, a_1, ..., a_p]`` such that
    ``x[n] + a_1 x[n-1] + ... + a_p x[n-p] = e[n]``, the innovation variance
    and the reflection coefficients.  With a biased (positive definite)
    autocorrelation every ``|k_i| < 1``, so the model is stable.
    """
    r = np.asarray(r, float)
    if r.size < order + 1:
        raise ParameterError(f"need {order + 1} autocorrelation lags, got {r.size}")
    if not r[0] > 0:
        raise NumericalError("zero-power signal: autocorrelation matrix is singular")
    a = np.zeros(order + 1)
    a[0] = 1.0
    k = np.zeros(order)
    err = r[0]
    for m in range(1, order + 1):
        acc = r[m] + a[1:m] @ r[m - 1 : 0 : -1]
        km = -acc / err
        a[1 : m + 1] = a[1 : m + 1] + km * a[m - 1 :: -1][: m]
        k[m - 1] = km
        err *= 1.0 - km * km
        if not err > 0:
            raise NumericalError(f"Levinson recursion lost positivity at order {m}")
    return a, err, k


def ar_density(a: np.ndarray, sigma2: float, fs: float, freqs: np.ndarray) -> np.ndarray:
    """One-sided AR spectrum 2*sigma2 / (fs |A(e^{j 2 pi f / fs})|^2)."""
    lags = np.arange(a.size)
    z = np.exp(-2j * np.pi * np.outer(freqs / fs, lags))
    return 2.0 * sigma2 / fs / np.abs(z @ a) ** 2


def yule_walker_psd(
    ch: PhasorChannel,
    order: int = 30,
    n_freqs: int = 4097,
    detrend_mode: DetrendMode = "linear",
) -> PsdEstimate:
    """Parametric AR(order) density from Yule-Walker / Levinson-Durbin."""
    if order < 1:
        raise ParameterError(f"AR order must be positive, got {order}")
    if n_freqs < 2048:
        raise ParameterError("n_freqs must be at least 2048")
    _require_finite(ch.values, f"channel {ch.id}")
    if len(ch) <= 10 * order:
        raise RangeError(
            f"channel {ch.id}: {len(ch)} samples is too short for AR({order}); "
            f"need more than {10 * order}"
        )
    x = _detrend_rows(np.asarray(ch.values, float), detrend_mode)
    r = autocorrelation(x, order)
    if not r[0] > 1e-300:
        raise NumericalError(f"channel {ch.id} is constant; autocorrelation is singular")
    a, sigma2, k = levinson_durbin(r, order)
    freqs = np.linspace(0.0, ch.rate_sps / 2.0, n_freqs)
    dens = ar_density(a, sigma2, ch.rate_sps, freqs)
    return PsdEstimate(
        freqs, dens, "yule_walker", freqs[1] - freqs[0], ch.id, None,
        {"order": order, "sigma2": sigma2, "ar": a.tolist(), "detrend_mode": detrend_mode},
    )


# --------------------------------------------------------------------------
# multichannel


def csd_matrix(
    chs: ChannelSet | list[PhasorChannel],
    segment_len_s: float = 60.0,
    overlap_frac: float = 0.5,
    window: WindowName = "hann",
    detrend_mode: DetrendMode = "linear",
) -> CsdStack:
    """Welch-averaged cross-spectral density matrices for aligned channels."""
    channels = list(chs)
    if not channels:
        raise ParameterError("no channels given")
    rates = {c.rate_sps for c in channels}
    if len(rates) != 1:
        raise ParameterError(f"channels have mixed rates {sorted(rates)}; resample first")
    lengths = {len(c) for c in channels}
    if len(lengths) != 1:
        raise ParameterError("channels differ in length; slice a common window first")
    ids = [c.id for c in channels]
    if len(set(ids)) != len(ids):
        raise ParameterError("duplicate channel ids")
    ref = channels[0]
    nper, step = _seg_geometry(ref, segment_len_s, overlap_frac)
    X = []
    for c in channels:
        _require_finite(c.values, f"channel {c.id}")
        segs = _segments(np.asarray(c.values, float), nper, step)
        spectra, scale, wts = _segment_spectra(segs, window, detrend_mode)
        X.append(spectra)
    X = np.stack(X)  # (channel, segment, freq)
    factor = (scale / ref.rate_sps * wts)
    nseg = X.shape[1]
    S = np.einsum("isk,jsk->kij", X.conj(), X) / nseg * factor[:, None, None]
    # diagonal computed exactly as welch_psd does
    for i in range(X.shape[0]):
        S[:, i, i] = _density(X[i], scale, ref.rate_sps, wts).mean(axis=0)
    return CsdStack(_rfreqs(nper, ref.rate_sps), S, ids, nseg, ref.rate_sps / nper)


# --------------------------------------------------------------------------
# point-on-wave demodulation and band energy


def hilbert_envelope(
    ch: PhasorChannel,
    carrier_hz: float = 60.0,
    band_hz: tuple[float, float] | None = None,
    filter_order: int = 4,
) -> PhasorChannel:
    """Amplitude envelope of a waveform channel around ``carrier_hz``.

    The waveform is band-passed with a zero-phase Butterworth filter over
    ``band_hz`` (absolute edges, default carrier +/- 30 Hz; ``filter_order``
    is the prototype order), demodulated by
    the analytic-signal magnitude, and mean-removed.  The PSD of the result
    shows the amplitude-modulation frequencies.
    """
    if ch.kind is not ChannelKind.POW:
        raise ParameterError(f"channel {ch.id} is {ch.kind.value}, expected POW")
    nyq = ch.rate_sps / 2.0
    if not 0 < carrier_hz < nyq:
        raise ParameterError(f"carrier {carrier_hz} Hz is beyond Nyquist ({nyq} Hz)")
    lo, hi = band_hz if band_hz is not None else (carrier_hz - 30.0, carrier_hz + 30.0)
    if not 0 < lo < carrier_hz < hi < nyq:
        raise ParameterError(
            f"band ({lo}, {hi}) Hz must bracket the carrier and stay below Nyquist ({nyq} Hz)"
        )
    if filter_order < 1:
        raise ParameterError("filter_order must be positive")
    _require_finite(ch.values, f"channel {ch.id}")
    if ch.duration < 10.0 / lo:
        raise RangeError(f"record of {ch.duration:g} s is shorter than 10/{lo:g} s")
    sos = signal.butter(filter_order, [lo, hi], btype="bandpass", fs=ch.rate_sps, output="sos")
    y = signal.sosfiltfilt(sos, np.asarray(ch.values, float))
    env = np.abs(signal.hilbert(y))
    return ch.with_values(env - env.mean(), id=f"{ch.id}:env", kind=ChannelKind.VPHM)


def band_energy_series(
    ch: PhasorChannel,
    band_hz: tuple[float, float],
    window_len_s: float = 300.0,
    hop_s: float | None = None,
    detrend_mode: DetrendMode = "linear",
    window: WindowName = "hann",
) -> BandEnergySeries:
    """Per-window power (unit^2) inside ``band_hz``: sum of density times df."""
    lo, hi = band_hz
    if not lo < hi:
        raise ParameterError(f"empty band ({lo}, {hi})")
    if hi > ch.rate_sps / 2.0:
        raise ParameterError(f"band edge {hi} Hz exceeds Nyquist ({ch.rate_sps / 2} Hz)")
    sg = spectrogram(ch, window_len_s, hop_s, detrend_mode, window)
    mask = (sg.freqs >= lo) & (sg.freqs <= hi)
    if not mask.any():
        raise ParameterError(f"band ({lo}, {hi}) Hz holds no frequency bin at {sg.df:g} Hz spacing")
    energy = sg.power[:, mask].sum(axis=1) * sg.df
    return BandEnergySeries(sg.times, energy, (lo, hi), sg.window_len_s, sg.hop_s, ch.id)
