"""Mode-energy percentage, V/I scenario labels, causality statistics, heatmaps.

The mode-energy percentage of a PSD over a band ``[f1, f2]`` is the area of
the density above a trend fitted outside the mode sub-band, divided by the
area above the in-band density minimum, times 100.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError
from .ingest import ChannelSet, PhasorChannel
from .spectral import BandEnergySeries, PsdEstimate, _readonly

DEFAULT_ON_THRESHOLD = 20.0
SURVEY_BAND_HZ = (5.0, 11.0)
MIN_SIDE_BINS = 4


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    if y.size < 2:
        return 0.0
    return float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2.0)


class Scenario(str, enum.Enum):
    S1 = "S1"      # mode in voltage only
    S2 = "S2"      # mode in voltage and current
    NONE = "none"


@dataclass(frozen=True)
class ModeEnergyConfig:
    f1_hz: float = SURVEY_BAND_HZ[0]
    f2_hz: float = SURVEY_BAND_HZ[1]
    mode_band_hz: tuple[float, float] = (7.5, 8.5)
    trend_model: str = "linear"

    def __post_init__(self):
        lo, hi = self.mode_band_hz
        if not self.f1_hz < lo < hi < self.f2_hz:
            raise ParameterError(
                f"need f1 < mode_lo < mode_hi < f2, got {self.f1_hz}, {lo}, {hi}, {self.f2_hz}"
            )
        if self.trend_model not in ("linear", "constant"):
            raise ParameterError(f"unknown trend model {self.trend_model!r}")

    @classmethod
    def around(cls, f0: float, half_width: float = 0.5, band=SURVEY_BAND_HZ, trend_model="linear"):
        return cls(band[0], band[1], (f0 - half_width, f0 + half_width), trend_model)


def mode_energy_percent(psd: PsdEstimate, cfg: ModeEnergyConfig) -> float:
    """Percentage of above-floor PSD area in ``[f1, f2]`` attributable to the mode.

    The trend is a least-squares line (or constant) through the non-mode bins
    of the band; the numerator integrand is clamped at zero so noise dips do
    not cancel genuine peak area.  The DC bin never enters the integrals.
    """
    f, p = psd.freqs, psd.density
    if cfg.f1_hz < f[0] or cfg.f2_hz > f[-1]:
        raise ParameterError(
            f"band [{cfg.f1_hz}, {cfg.f2_hz}] Hz outside PSD range [{f[0]}, {f[-1]}]"
        )
    m = (f >= cfg.f1_hz) & (f <= cfg.f2_hz) & (f > 0)
    fb, pb = f[m], p[m]
    lo, hi = cfg.mode_band_hz
    left = fb < lo
    right = fb > hi
    if left.sum() < MIN_SIDE_BINS or right.sum() < MIN_SIDE_BINS:
        raise ParameterError(
            f"need at least {MIN_SIDE_BINS} non-mode bins on each side of the mode band "
            f"(have {int(left.sum())} and {int(right.sum())})"
        )
    nm = left | right
    if cfg.trend_model == "linear":
        A = np.column_stack([np.ones(nm.sum()), fb[nm]])
        coef, *_ = np.linalg.lstsq(A, pb[nm], rcond=None)
        trend = coef[0] + coef[1] * fb
    else:
        trend = np.full_like(fb, pb[nm].mean())
    num = _trapezoid(np.maximum(pb - trend, 0.0), fb)
    pmin = float(pb.min())
    den = _trapezoid(pb - pmin, fb)
    scale = max(float(np.abs(pb).max()), 1e-300)
    if not den > 1e-15 * (cfg.f2_hz - cfg.f1_hz) * scale:
        return 0.0
    e = 100.0 * num / den
    if not math.isfinite(e):
        return 0.0
    return min(max(e, 0.0), 100.0)


def classify_scenario(v_E: float, i_E: float, on_thresh: float = DEFAULT_ON_THRESHOLD) -> Scenario:
    """S2 when both voltage and current carry the mode, S1 for voltage only."""
    v_on = v_E >= on_thresh
    i_on = i_E >= on_thresh
    if v_on and i_on:
        return Scenario.S2
    if v_on:
        return Scenario.S1
    return Scenario.NONE


# --------------------------------------------------------------------------
# causality


@dataclass(frozen=True)
class CausalityReport:
    pearson_r: dict[str, float]
    undefined: tuple[str, ...]
    mean_on: float
    mean_off: float
    n_on: int
    n_off: int
    scatter: list[tuple[float, float, float, float]] = field(repr=False)

    @property
    def mean_ratio(self) -> float:
        if self.n_on == 0 or self.n_off == 0:
            return float("nan")
        if self.mean_off == 0:
            return float("inf") if self.mean_on > 0 else float("nan")
        return self.mean_on / self.mean_off

    def to_dict(self) -> dict:
        return {
            "pearson_r": {k: (None if math.isnan(v) else v) for k, v in self.pearson_r.items()},
            "undefined": list(self.undefined),
            "mean_on": self.mean_on,
            "mean_off": self.mean_off,
            "n_on": self.n_on,
            "n_off": self.n_off,
            "mean_ratio": None if math.isnan(self.mean_ratio) else self.mean_ratio,
        }

    def scatter_csv(self, driver: str) -> str:
        col = {"P": 1, "|Q|": 2, "PF": 3}[driver]
        name = {"P": "p", "|Q|": "abs_q", "PF": "pf"}[driver]
        rows = [f"{name},energy"] + [f"{r[col]!r},{r[0]!r}" for r in self.scatter]
        return "\n".join(rows) + "\n"


def _constant(x: np.ndarray) -> bool:
    # window means of a constant series wobble at round-off level
    return float(np.ptp(x)) <= 1e-12 * float(np.abs(x).max())


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if _constant(x) or _constant(y):
        return float("nan")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0 or sy == 0:
        return float("nan")
    return float(xc @ yc) / (sx * sy)


def window_means(ch: PhasorChannel, times: np.ndarray, window_len_s: float) -> np.ndarray:
    """Mean of ``ch`` over windows of ``window_len_s`` centred at ``times``."""
    t = np.asarray(times, float)
    i0 = np.round((t - window_len_s / 2 - ch.t0) * ch.rate_sps).astype(int)
    i1 = np.round((t + window_len_s / 2 - ch.t0) * ch.rate_sps).astype(int)
    i0 = np.clip(i0, 0, len(ch))
    i1 = np.clip(i1, 0, len(ch))
    out = np.full(t.size, np.nan)
    for k, (a, b) in enumerate(zip(i0, i1)):
        if b > a:
            seg = ch.values[a:b]
            seg = seg[~np.isnan(seg)]
            if seg.size:
                out[k] = seg.mean()
    return out


def correlate_energy_power(
    energy_ts: BandEnergySeries | Sequence[float],
    p_ts: Sequence[float],
    q_ts: Sequence[float],
    pf_ts: Sequence[float],
) -> CausalityReport:
    """Pearson correlation of window energy against P, |Q| and PF.

    All series must already share one window timeline.  Windows with
    injection (P > 0) are compared against the rest by group means.
    """
    e = np.asarray(energy_ts.energy if isinstance(energy_ts, BandEnergySeries) else energy_ts, float)
    p = np.asarray(p_ts, float)
    q = np.abs(np.asarray(q_ts, float))
    pf = np.asarray(pf_ts, float)
    if not (e.size == p.size == q.size == pf.size):
        raise ParameterError("energy and driver series must share one window timeline")
    keep = np.isfinite(e) & np.isfinite(p) & np.isfinite(q) & np.isfinite(pf)
    e, p, q, pf = e[keep], p[keep], q[keep], pf[keep]
    if e.size < 10:
        raise ParameterError(f"need at least 10 aligned windows, got {e.size}")
    r = {"P": _pearson(e, p), "|Q|": _pearson(e, q), "PF": _pearson(e, pf)}
    undefined = tuple(k for k, v in r.items() if math.isnan(v))
    on = p > 0
    mean_on = float(e[on].mean()) if on.any() else float("nan")
    mean_off = float(e[~on].mean()) if (~on).any() else float("nan")
    scatter = list(zip(e.tolist(), p.tolist(), q.tolist(), pf.tolist()))
    return CausalityReport(r, undefined, mean_on, mean_off, int(on.sum()), int((~on).sum()), scatter)


# --------------------------------------------------------------------------
# heatmap


@dataclass(frozen=True, eq=False)
class HeatmapGrid:
    x: np.ndarray        # cell-centre abscissae, length nx
    y: np.ndarray        # cell-centre ordinates, length ny
    values: np.ndarray   # (ny, nx)
    bounds: tuple[float, float, float, float]

    def __post_init__(self):
        for name in ("x", "y", "values"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    def to_csv(self) -> str:
        out = ["y\\x," + ",".join(repr(v) for v in self.x.tolist())]
        for yy, row in zip(self.y.tolist(), self.values.tolist()):
            out.append(repr(yy) + "," + ",".join("" if v != v else repr(v) for v in row))
        return "\n".join(out) + "\n"


def heatmap_grid(
    points: Iterable[tuple[float, float, float]],
    grid: tuple[int, int, tuple[float, float, float, float]],
    idw_power: float = 2.0,
    cutoff_km: float | None = None,
) -> HeatmapGrid:
    """Inverse-distance-weighted grid of point values.

    ``grid`` is ``(nx, ny, (xmin, xmax, ymin, ymax))``.  A cell that contains
    sample points takes their mean value; other cells are IDW-interpolated at
    the cell centre.  With ``cutoff_km`` set, cells whose nearest sample is
    farther than the cutoff are NaN.
    """
    pts = np.asarray(list(points), float).reshape(-1, 3)
    nx, ny, (xmin, xmax, ymin, ymax) = grid
    if nx < 1 or ny < 1:
        raise ParameterError(f"grid dimensions must be positive, got {nx} x {ny}")
    if pts.shape[0] < 1:
        raise ParameterError("heatmap needs at least one point")
    if not (xmin < xmax and ymin < ymax):
        raise ParameterError("grid bounds are empty")
    if (pts[:, 0].min() < xmin or pts[:, 0].max() > xmax
            or pts[:, 1].min() < ymin or pts[:, 1].max() > ymax):
        raise ParameterError("grid bounds must enclose every point")
    dx = (xmax - xmin) / nx
    dy = (ymax - ymin) / ny
    xc = xmin + (np.arange(nx) + 0.5) * dx
    yc = ymin + (np.arange(ny) + 0.5) * dy
    X, Y = np.meshgrid(xc, yc)
    dist = np.hypot(X[..., None] - pts[:, 0], Y[..., None] - pts[:, 1])
    with np.errstate(divide="ignore"):
        w = dist ** (-idw_power)
    exact = np.isinf(w)
    w = np.where(exact.any(axis=-1, keepdims=True), exact.astype(float), w)
    vals = (w * pts[:, 2]).sum(axis=-1) / w.sum(axis=-1)

    # cells holding samples reproduce them
    ix = np.minimum(((pts[:, 0] - xmin) / dx).astype(int), nx - 1)
    iy = np.minimum(((pts[:, 1] - ymin) / dy).astype(int), ny - 1)
    acc = np.zeros((ny, nx))
    cnt = np.zeros((ny, nx))
    np.add.at(acc, (iy, ix), pts[:, 2])
    np.add.at(cnt, (iy, ix), 1.0)
    has = cnt > 0
    vals[has] = acc[has] / cnt[has]
    if cutoff_km is not None:
        vals[(dist.min(axis=-1) > cutoff_km) & ~has] = np.nan
    return HeatmapGrid(xc, yc, vals, (xmin, xmax, ymin, ymax))


# --------------------------------------------------------------------------
# per-channel report


@dataclass(frozen=True)
class ChannelEnergy:
    id: str
    substation: str
    kind: str
    e_percent: float
    scenario: Scenario
    location: tuple[float, float] | None


@dataclass(frozen=True)
class ModeEnergyReport:
    channels: tuple[ChannelEnergy, ...]
    config: ModeEnergyConfig
    heatmap: HeatmapGrid | None = None
    on_thresh: float = DEFAULT_ON_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "config": {
                "f1_hz": self.config.f1_hz,
                "f2_hz": self.config.f2_hz,
                "mode_band_hz": list(self.config.mode_band_hz),
                "trend_model": self.config.trend_model,
                "on_thresh": self.on_thresh,
            },
            "channels": [
                {
                    "id": c.id,
                    "substation": c.substation,
                    "kind": c.kind,
                    "e_percent": c.e_percent,
                    "scenario": c.scenario.value,
                    "location": list(c.location) if c.location else None,
                }
                for c in self.channels
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_csv(self) -> str:
        rows = ["id,substation,kind,e_percent,scenario,x,y"]
        for c in self.channels:
            xy = f"{c.location[0]!r},{c.location[1]!r}" if c.location else ","
            rows.append(f"{c.id},{c.substation},{c.kind},{c.e_percent!r},{c.scenario.value},{xy}")
        return "\n".join(rows) + "\n"


def energy_report(
    chs: ChannelSet,
    psds: dict[str, PsdEstimate],
    cfg: ModeEnergyConfig,
    on_thresh: float = DEFAULT_ON_THRESHOLD,
    grid: tuple[int, int, tuple[float, float, float, float]] | None = None,
    idw_power: float = 2.0,
) -> ModeEnergyReport:
    """Mode energy for every channel with a PSD, scenario per substation.

    A voltage channel's scenario pairs it with the strongest current channel
    of its substation.  The heatmap uses the strongest voltage channel per
    located substation.
    """
    e = {cid: mode_energy_percent(psd, cfg) for cid, psd in psds.items()}
    i_best: dict[str, float] = {}
    for cid, val in e.items():
        ch = chs[cid]
        if ch.kind.is_current:
            i_best[ch.substation] = max(i_best.get(ch.substation, 0.0), val)
    rows = []
    for cid, val in e.items():
        ch = chs[cid]
        if ch.kind.is_voltage:
            sc = classify_scenario(val, i_best.get(ch.substation, 0.0), on_thresh)
        else:
            sc = Scenario.NONE
        rows.append(ChannelEnergy(cid, ch.substation, ch.kind.value, val, sc, ch.location))
    heat = None
    if grid is not None:
        best: dict[str, tuple[float, float, float]] = {}
        for r in rows:
            if r.location is None or r.kind not in ("VPHM", "VPHA"):
                continue
            if r.substation not in best or r.e_percent > best[r.substation][2]:
                best[r.substation] = (r.location[0], r.location[1], r.e_percent)
        if best:
            heat = heatmap_grid([best[k] for k in sorted(best)], grid, idw_power)
    return ModeEnergyReport(tuple(rows), cfg, heat, on_thresh)
