"""Minimal deterministic SVG line plots (lines, axes, ticks, legend).

Direct vector-graphics emission keeps outputs byte-reproducible and
dependency-free; no interactive UI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 72, 24, 36, 56


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    color: str = ""
    dash: str = ""  # e.g. "6,3" for dashed


def _ticks_linear(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * step:
        ticks.append(v)
        v += step
    return ticks


def _ticks_log(lo: float, hi: float) -> list[float]:
    lo_e = math.ceil(math.log10(lo) - 1e-12)
    hi_e = math.floor(math.log10(hi) + 1e-12)
    return [10.0**e for e in range(lo_e, hi_e + 1)]


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:g}"


def write_line_plot(
    path: str,
    series: list[Series],
    title: str = "",
    xlabel: str = "t",
    ylabel: str = "error",
    xscale: str = "log",
    yscale: str = "linear",
) -> None:
    pts = [(s.x, s.y) for s in series if len(s.x)]
    if not pts:
        raise ValueError("nothing to plot")
    finite_x = np.concatenate([x[np.isfinite(y) & np.isfinite(x)] for x, y in pts])
    finite_y = np.concatenate([y[np.isfinite(y) & np.isfinite(x)] for x, y in pts])
    if finite_x.size == 0:
        raise ValueError("no finite data to plot")
    if xscale == "log":
        finite_x = finite_x[finite_x > 0]
    if yscale == "log":
        finite_y = finite_y[finite_y > 0]
    x_lo, x_hi = float(finite_x.min()), float(finite_x.max())
    y_lo, y_hi = float(finite_y.min()), float(finite_y.max())
    if yscale == "linear":
        pad = 0.05 * max(y_hi - y_lo, 1e-12)
        y_lo, y_hi = y_lo - pad, y_hi + pad
        y_lo = min(y_lo, 0.0) if y_lo > -pad else y_lo

    def sx(v: float) -> float:
        if xscale == "log":
            f = (math.log10(v) - math.log10(x_lo)) / max(
                math.log10(x_hi) - math.log10(x_lo), 1e-12
            )
        else:
            f = (v - x_lo) / max(x_hi - x_lo, 1e-12)
        return _ML + f * (_W - _ML - _MR)

    def sy(v: float) -> float:
        if yscale == "log":
            f = (math.log10(v) - math.log10(y_lo)) / max(
                math.log10(y_hi) - math.log10(y_lo), 1e-12
            )
        else:
            f = (v - y_lo) / max(y_hi - y_lo, 1e-12)
        return _H - _MB - f * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    # axes frame
    parts.append(
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
        f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>'
    )
    xticks = _ticks_log(x_lo, x_hi) if xscale == "log" else _ticks_linear(x_lo, x_hi)
    yticks = _ticks_log(y_lo, y_hi) if yscale == "log" else _ticks_linear(y_lo, y_hi)
    for v in xticks:
        if not (x_lo <= v <= x_hi):
            continue
        px = sx(v)
        parts.append(
            f'<line x1="{px:.2f}" y1="{_H - _MB}" x2="{px:.2f}" '
            f'y2="{_H - _MB + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px:.2f}" y="{_H - _MB + 18}" font-size="11" '
            f'text-anchor="middle">{_fmt(v)}</text>'
        )
    for v in yticks:
        if not (y_lo <= v <= y_hi):
            continue
        py = sy(v)
        parts.append(
            f'<line x1="{_ML - 5}" y1="{py:.2f}" x2="{_ML}" y2="{py:.2f}" '
            f'stroke="black"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{py + 4:.2f}" font-size="11" '
            f'text-anchor="end">{_fmt(v)}</text>'
        )
    for idx, s in enumerate(series):
        color = s.color or _PALETTE[idx % len(_PALETTE)]
        ok = np.isfinite(s.x) & np.isfinite(s.y)
        if xscale == "log":
            ok &= s.x > 0
        if yscale == "log":
            ok &= s.y > 0
        xs, ys = s.x[ok], s.y[ok]
        if len(xs) == 0:
            continue
        coords = " ".join(f"{sx(float(a)):.2f},{sy(float(b)):.2f}" for a, b in zip(xs, ys))
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.6"{dash}/>'
        )
        ly = _MT + 16 + 16 * idx
        parts.append(
            f'<line x1="{_W - _MR - 150}" y1="{ly}" x2="{_W - _MR - 122}" '
            f'y2="{ly}" stroke="{color}" stroke-width="1.6"{dash}/>'
        )
        parts.append(
            f'<text x="{_W - _MR - 116}" y="{ly + 4}" font-size="11">{s.label}</text>'
        )
    if title:
        parts.append(
            f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_MT - 12}" font-size="13" '
            f'text-anchor="middle">{title}</text>'
        )
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2:.0f}" y="{_H - 16}" font-size="12" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{(_MT + _H - _MB) / 2:.0f}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 18 '
        f'{(_MT + _H - _MB) / 2:.0f})">{ylabel}</text>'
    )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
