"""Minimal self-contained SVG rendering for spectra, maps and mode shapes.

Output is plain text with fixed-precision coordinates, so identical data
always renders to identical bytes.  Colour maps use a 256-step ramp
interpolated from viridis anchor colours (perceptually uniform, monotone in
lightness).
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

W, H = 720, 420
ML, MR, MT, MB = 70, 110, 40, 50

_VIRIDIS_ANCHORS = np.array([
    (68, 1, 84), (72, 40, 120), (62, 74, 137), (49, 104, 142), (38, 130, 142),
    (31, 158, 137), (53, 183, 121), (109, 205, 89), (180, 222, 44), (253, 231, 37),
], float)

RAMP = np.stack([
    np.interp(np.linspace(0, 1, 256), np.linspace(0, 1, len(_VIRIDIS_ANCHORS)), _VIRIDIS_ANCHORS[:, c])
    for c in range(3)
], axis=1).round().astype(int)

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]


def _f(v: float) -> str:
    return f"{v:.2f}"


def _color(level: float) -> str:
    if level != level:
        return "#dddddd"
    r, g, b = RAMP[int(min(max(level, 0.0), 1.0) * 255)]
    return f"#{r:02x}{g:02x}{b:02x}"


def _head(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


class _Axes:
    def __init__(self, xlim, ylim, width=W - ML - MR, height=H - MT - MB):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.w, self.h = width, height

    def px(self, x):
        return ML + (x - self.x0) / (self.x1 - self.x0 or 1) * self.w

    def py(self, y):
        return MT + self.h - (y - self.y0) / (self.y1 - self.y0 or 1) * self.h

    def frame(self, xlabel: str, ylabel: str, yfmt=lambda v: f"{v:g}") -> list[str]:
        out = [f'<rect x="{ML}" y="{MT}" width="{self.w}" height="{self.h}" fill="none" stroke="black"/>']
        for t in _ticks(self.x0, self.x1):
            x = self.px(t)
            out.append(f'<line x1="{_f(x)}" y1="{MT + self.h}" x2="{_f(x)}" y2="{MT + self.h + 4}" stroke="black"/>')
            out.append(f'<text x="{_f(x)}" y="{MT + self.h + 16}" text-anchor="middle">{t:g}</text>')
        for t in _ticks(self.y0, self.y1, 5):
            y = self.py(t)
            out.append(f'<line x1="{ML - 4}" y1="{_f(y)}" x2="{ML}" y2="{_f(y)}" stroke="black"/>')
            out.append(f'<text x="{ML - 6}" y="{_f(y + 4)}" text-anchor="end">{escape(yfmt(t))}</text>')
        out.append(f'<text x="{ML + self.w / 2}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
        out.append(
            f'<text x="16" y="{MT + self.h / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {MT + self.h / 2})">{escape(ylabel)}</text>'
        )
        return out


def line_plot(series, title="", xlabel="Frequency (Hz)", ylabel="PSD (dB)", log_y=True, xlim=None) -> str:
    """``series`` is a list of ``(x, y, label)``; ``log_y`` plots 10*log10(y)."""
    prepared = []
    for x, y, label in series:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if xlim is not None:
            m = (x >= xlim[0]) & (x <= xlim[1])
            x, y = x[m], y[m]
        if log_y:
            with np.errstate(divide="ignore"):
                y = 10 * np.log10(np.where(y > 0, y, np.nan))
        prepared.append((x, y, label))
    xs = np.concatenate([p[0] for p in prepared]) if prepared else np.array([0.0, 1.0])
    ys = np.concatenate([p[1] for p in prepared]) if prepared else np.array([0.0, 1.0])
    ys = ys[np.isfinite(ys)]
    ylo, yhi = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    pad = 0.05 * (yhi - ylo or 1.0)
    ax = _Axes((float(xs.min()), float(xs.max())), (ylo - pad, yhi + pad))
    out = _head(title) + ax.frame(xlabel, ylabel)
    for i, (x, y, label) in enumerate(prepared):
        pts = " ".join(f"{_f(ax.px(a))},{_f(ax.py(b))}" for a, b in zip(x, y) if np.isfinite(b))
        col = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1"/>')
        if len(prepared) <= 12:
            ly = MT + 14 * i + 8
            out.append(f'<line x1="{W - MR + 8}" y1="{ly}" x2="{W - MR + 22}" y2="{ly}" stroke="{col}"/>')
            out.append(f'<text x="{W - MR + 26}" y="{ly + 4}" font-size="9">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(matrix, x, y, title="", xlabel="", ylabel="", bar_label="", log=False,
            annotations: list[tuple[float, str]] = ()) -> str:
    """Colour-mapped ``matrix[len(y)][len(x)]`` with a scale bar.

    ``annotations`` are vertical markers at x positions with text labels.
    """
    z = np.asarray(matrix, float)
    if log:
        with np.errstate(divide="ignore", invalid="ignore"):
            z = 10 * np.log10(np.where(z > 0, z, np.nan))
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    finite = z[np.isfinite(z)]
    zlo, zhi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = zhi - zlo or 1.0
    dx = (x[1] - x[0]) if x.size > 1 else 1.0
    dy = (y[1] - y[0]) if y.size > 1 else 1.0
    ax = _Axes((x[0] - dx / 2, x[-1] + dx / 2), (y[0] - dy / 2, y[-1] + dy / 2))
    out = _head(title)
    cw = ax.w / x.size
    ch = ax.h / y.size
    for j in range(y.size):
        top = ax.py(y[j] + dy / 2)
        for i in range(x.size):
            out.append(
                f'<rect x="{_f(ax.px(x[i] - dx / 2))}" y="{_f(top)}" width="{_f(cw + 0.3)}" '
                f'height="{_f(ch + 0.3)}" fill="{_color((z[j, i] - zlo) / span)}"/>'
            )
    out += ax.frame(xlabel, ylabel)
    for xa, text in annotations:
        px = ax.px(xa)
        out.append(f'<line x1="{_f(px)}" y1="{MT}" x2="{_f(px)}" y2="{MT + ax.h}" stroke="white" stroke-dasharray="4,3"/>')
        out.append(f'<text x="{_f(px + 2)}" y="{MT + 12}" fill="white" font-size="9">{escape(text)}</text>')
    bx = W - MR + 30
    for k in range(64):
        yy = MT + ax.h * (1 - (k + 1) / 64)
        out.append(f'<rect x="{bx}" y="{_f(yy)}" width="14" height="{_f(ax.h / 64 + 0.3)}" fill="{_color(k / 63)}"/>')
    out.append(f'<text x="{bx + 18}" y="{MT + 8}" font-size="9">{zhi:.3g}</text>')
    out.append(f'<text x="{bx + 18}" y="{MT + ax.h}" font-size="9">{zlo:.3g}</text>')
    out.append(f'<text x="{bx}" y="{MT + ax.h + 16}" font-size="9">{escape(bar_label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter(x, y, title="", xlabel="", ylabel="") -> str:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    m = np.isfinite(x) & np.isfinite(y)
    x, y = x[m], y[m]
    if x.size == 0:
        x = y = np.array([0.0, 1.0])
    xpad = 0.05 * (x.max() - x.min() or 1.0)
    ypad = 0.05 * (y.max() - y.min() or 1.0)
    ax = _Axes((x.min() - xpad, x.max() + xpad), (y.min() - ypad, y.max() + ypad))
    out = _head(title) + ax.frame(xlabel, ylabel, yfmt=lambda v: f"{v:.3g}")
    for a, b in zip(x, y):
        out.append(f'<circle cx="{_f(ax.px(a))}" cy="{_f(ax.py(b))}" r="2.5" fill="#1f77b4" fill-opacity="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def polar_shape(ids, magnitudes, phases, reference_id, title="") -> str:
    """One arrow per channel; the reference channel is drawn in red."""
    cx, cy, rad = W / 2 - 60, H / 2 + 10, min(W, H) / 2 - 60
    out = _head(title)
    for frac in (0.25, 0.5, 0.75, 1.0):
        out.append(f'<circle cx="{cx}" cy="{cy}" r="{_f(rad * frac)}" fill="none" stroke="#cccccc"/>')
    out.append(f'<line x1="{cx - rad}" y1="{cy}" x2="{cx + rad}" y2="{cy}" stroke="#cccccc"/>')
    out.append(f'<line x1="{cx}" y1="{cy - rad}" x2="{cx}" y2="{cy + rad}" stroke="#cccccc"/>')
    out.append(f'<text x="{_f(cx + rad + 4)}" y="{cy + 4}" font-size="9">0</text>')
    out.append(f'<text x="{_f(cx - rad - 14)}" y="{cy + 4}" font-size="9">&#960;</text>')
    for i, (cid, mag, ph) in enumerate(zip(ids, magnitudes, phases)):
        ex = cx + rad * mag * math.cos(ph)
        ey = cy - rad * mag * math.sin(ph)
        ref = cid == reference_id
        col = "#d62728" if ref else PALETTE[i % len(PALETTE)]
        width = 2.5 if ref else 1.5
        out.append(f'<line x1="{cx}" y1="{cy}" x2="{_f(ex)}" y2="{_f(ey)}" stroke="{col}" stroke-width="{width}"/>')
        out.append(f'<circle cx="{_f(ex)}" cy="{_f(ey)}" r="3" fill="{col}"/>')
        ly = MT + 14 * i + 8
        out.append(f'<line x1="{W - 200}" y1="{ly}" x2="{W - 186}" y2="{ly}" stroke="{col}" stroke-width="{width}"/>')
        label = f"{cid}{' (ref)' if ref else ''}"
        out.append(f'<text x="{W - 182}" y="{ly + 4}" font-size="9">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def downsample_max(matrix: np.ndarray, max_rows: int, max_cols: int):
    """Max-pool a matrix to at most ``max_rows`` x ``max_cols`` (NaN-aware).

    Returns the pooled matrix and the row/column group start indices.
    """
    z = np.asarray(matrix, float)
    r_edges = np.linspace(0, z.shape[0], min(max_rows, z.shape[0]) + 1).astype(int)
    c_edges = np.linspace(0, z.shape[1], min(max_cols, z.shape[1]) + 1).astype(int)
    r0, c0 = r_edges[:-1], c_edges[:-1]
    out = np.fmax.reduceat(np.fmax.reduceat(z, r0, axis=0), c0, axis=1)
    return out, r0, c0
