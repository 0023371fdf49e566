"""Self-contained SVG output: grayscale heatmaps and log-scale line plots.

Plain string assembly with fixed number formatting, so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .landscape.fluxmap import FluxMap

_W, _H = 640, 480
_M = {"left": 80, "right": 20, "top": 30, "bottom": 60}
_NAN_FILL = "#d04040"
_LINE_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#000000", "#9467bd")


def _num(v: float) -> str:
    return f"{v:.2f}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="#ffffff"/>',
        f'<text x="{_W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]


def _gray(level: float, invert: bool) -> str:
    # level 0 -> black, 1 -> white; inverted: 0 -> white, 1 -> black
    g = int(round(255 * ((1.0 - level) if invert else level)))
    return f"#{g:02x}{g:02x}{g:02x}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def heatmap_svg(
    fmap: FluxMap,
    title: str = "",
    log_scale: bool = False,
    invert: bool = False,
    vmin: float | None = None,
    vmax: float | None = None,
) -> str:
    """Grayscale image of ``fmap`` (rows on the vertical axis, increasing upwards).

    Low values are dark; ``invert`` makes high values dark instead. NaN
    cells are drawn in red.
    """
    v = np.array(fmap.values, dtype=float)
    if log_scale:
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(v > 0, np.log10(np.where(v > 0, v, 1.0)), np.nan)
    finite = v[np.isfinite(v)]
    tr = math.log10 if log_scale else float
    lo = tr(vmin) if vmin is not None else (float(finite.min()) if finite.size else 0.0)
    hi = tr(vmax) if vmax is not None else (float(finite.max()) if finite.size else 1.0)
    span = hi - lo or 1.0

    x0, y0 = _M["left"], _M["top"]
    pw, ph = _W - _M["left"] - _M["right"] - 60, _H - _M["top"] - _M["bottom"]
    nr, nc = v.shape
    cw, ch = pw / nc, ph / nr
    out = _header(title)
    out.append('<g shape-rendering="crispEdges">')
    for i in range(nr):
        y = y0 + ph - (i + 1) * ch
        for j in range(nc):
            val = v[i, j]
            if not np.isfinite(val):
                fill = _NAN_FILL
            else:
                fill = _gray(min(max((val - lo) / span, 0.0), 1.0), invert)
            out.append(
                f'<rect x="{_num(x0 + j * cw)}" y="{_num(y)}" width="{_num(cw + 0.05)}" '
                f'height="{_num(ch + 0.05)}" fill="{fill}"/>'
            )
    out.append("</g>")
    out.append(
        f'<rect x="{x0}" y="{y0}" width="{_num(pw)}" height="{_num(ph)}" fill="none" stroke="#000"/>'
    )
    for t in _ticks(fmap.cols.start, fmap.cols.stop):
        x = x0 + (t - fmap.cols.start) / (fmap.cols.stop - fmap.cols.start) * pw
        out.append(f'<text x="{_num(x)}" y="{_num(y0 + ph + 16)}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(fmap.rows.start, fmap.rows.stop):
        y = y0 + ph - (t - fmap.rows.start) / (fmap.rows.stop - fmap.rows.start) * ph
        out.append(f'<text x="{x0 - 6}" y="{_num(y + 4)}" text-anchor="end">{t:.3g}</text>')
    out.append(
        f'<text x="{_num(x0 + pw / 2)}" y="{_H - 20}" text-anchor="middle">{escape(fmap.cols.name)}</text>'
    )
    out.append(
        f'<text x="20" y="{_num(y0 + ph / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 20 {_num(y0 + ph / 2)})">{escape(fmap.rows.name)}</text>'
    )
    # colour bar
    bx = x0 + pw + 20
    steps = 32
    for k in range(steps):
        fill = _gray(k / (steps - 1), invert)
        out.append(
            f'<rect x="{bx}" y="{_num(y0 + ph - (k + 1) * ph / steps)}" width="14" '
            f'height="{_num(ph / steps + 0.05)}" fill="{fill}"/>'
        )
    label = "log10 " + fmap.quantity if log_scale else fmap.quantity
    out.append(f'<text x="{bx + 18}" y="{_num(y0 + ph)}" font-size="10">{lo:.3g}</text>')
    out.append(f'<text x="{bx + 18}" y="{y0 + 8}" font-size="10">{hi:.3g}</text>')
    out.append(f'<text x="{bx}" y="{y0 - 6}" font-size="10">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_plot_svg(
    x: Sequence[float],
    series: dict[str, Sequence[float]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    log_y: bool = True,
) -> str:
    """Line plot of one or more series against ``x``; non-finite points are skipped."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    vals = np.concatenate([y[np.isfinite(y) & ((y > 0) if log_y else True)] for y in ys.values()])
    if vals.size == 0:
        vals = np.array([1.0])
    tr = np.log10 if log_y else (lambda a: a)
    y_lo, y_hi = float(np.min(tr(vals))), float(np.max(tr(vals)))
    if log_y:
        y_lo, y_hi = math.floor(y_lo), math.ceil(y_hi)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    x_lo, x_hi = float(np.min(x)), float(np.max(x))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    x0, y0 = _M["left"], _M["top"]
    pw, ph = _W - _M["left"] - _M["right"] - 100, _H - _M["top"] - _M["bottom"]

    def px(a: float) -> float:
        return x0 + (a - x_lo) / (x_hi - x_lo) * pw

    def py(a: float) -> float:
        return y0 + ph - (a - y_lo) / (y_hi - y_lo) * ph

    out = _header(title)
    out.append(f'<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>')
    y_ticks = range(int(y_lo), int(y_hi) + 1) if log_y else _ticks(y_lo, y_hi)
    for t in y_ticks:
        label = f"1e{int(t)}" if log_y else f"{t:.3g}"
        out.append(f'<line x1="{x0}" y1="{_num(py(t))}" x2="{x0 + pw}" y2="{_num(py(t))}" stroke="#ddd"/>')
        out.append(f'<text x="{x0 - 6}" y="{_num(py(t) + 4)}" text-anchor="end">{label}</text>')
    for t in _ticks(x_lo, x_hi):
        out.append(f'<text x="{_num(px(t))}" y="{y0 + ph + 16}" text-anchor="middle">{t:.3g}</text>')
    for k, (name, y) in enumerate(ys.items()):
        ok = np.isfinite(y) & ((y > 0) if log_y else True)
        pts = " ".join(f"{_num(px(a))},{_num(py(float(tr(b))))}" for a, b in zip(x[ok], y[ok]))
        color = _LINE_COLORS[k % len(_LINE_COLORS)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = y0 + 14 + 16 * k
        out.append(f'<line x1="{x0 + pw + 10}" y1="{ly}" x2="{x0 + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x0 + pw + 34}" y="{ly + 4}" font-size="10">{escape(name)}</text>')
    out.append(f'<text x="{_num(x0 + pw / 2)}" y="{_H - 20}" text-anchor="middle">{escape(x_label)}</text>')
    out.append(
        f'<text x="20" y="{_num(y0 + ph / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 20 {_num(y0 + ph / 2)})">{escape(y_label)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(text: str, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(text)
    return path
