"""Minimal self-contained SVG line charts (no plotting dependency).

Presentation only: one polyline per labelled series, linear or log axes,
ticks and a legend. Output is a complete SVG 1.1 document.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#393b79", "#ad494a", "#637939", "#7b4173", "#e6550d",
)


def _transform(value: float, lo: float, hi: float, log: bool) -> float:
    if log:
        return (math.log(value) - math.log(lo)) / (math.log(hi) - math.log(lo))
    return (value - lo) / (hi - lo)


def _ticks(lo: float, hi: float, log: bool, count: int = 5) -> list[float]:
    if log:
        lo_e, hi_e = math.log10(lo), math.log10(hi)
        if hi_e - lo_e >= 1.0:
            return [10.0 ** e for e in range(math.ceil(lo_e), math.floor(hi_e) + 1)]
        return [10.0 ** (lo_e + f * (hi_e - lo_e)) for f in (0.0, 0.5, 1.0)]
    return [lo + f * (hi - lo) / (count - 1) for f in range(count)]


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


def line_chart(
    series: list[tuple[str, list[tuple[float, float]]]],
    *,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    log_x: bool = False,
    log_y: bool = False,
    width: int = 720,
    height: int = 480,
) -> str:
    """Render labelled (x, y) series as an SVG document string."""
    if not series:
        raise ValueError("need at least one series")
    xs = [p[0] for _, pts in series for p in pts]
    ys = [p[1] for _, pts in series for p in pts]
    if not xs:
        raise ValueError("series contain no points")
    if log_x and min(xs) <= 0:
        raise ValueError("log x axis needs positive x values")
    if log_y and min(ys) <= 0:
        raise ValueError("log y axis needs positive y values")

    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_lo == y_hi:
        pad = abs(y_lo) * 0.1 or 0.5
        y_lo, y_hi = y_lo - pad, y_hi + pad

    left, right, top, bottom = 70, 160, 40, 50
    plot_w = width - left - right
    plot_h = height - top - bottom

    def px(x: float) -> float:
        return left + _transform(x, x_lo, x_hi, log_x) * plot_w

    def py(y: float) -> float:
        return top + (1.0 - _transform(y, y_lo, y_hi, log_y)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{escape(title)}</text>'
        )
    for tx in _ticks(x_lo, x_hi, log_x):
        parts.append(
            f'<line x1="{px(tx):.2f}" y1="{top + plot_h}" x2="{px(tx):.2f}" '
            f'y2="{top + plot_h + 5}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{px(tx):.2f}" y="{top + plot_h + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(tx)}</text>'
        )
    for ty in _ticks(y_lo, y_hi, log_y):
        parts.append(
            f'<line x1="{left - 5}" y1="{py(ty):.2f}" x2="{left}" '
            f'y2="{py(ty):.2f}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{py(ty) + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(ty)}</text>'
        )
    if x_label:
        parts.append(
            f'<text x="{left + plot_w / 2:.1f}" y="{height - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{escape(x_label)}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="18" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 18 {top + plot_h / 2:.1f})">{escape(y_label)}</text>'
        )
    for idx, (label, pts) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        ly = top + 14 + idx * 16
        parts.append(
            f'<line x1="{left + plot_w + 8}" y1="{ly - 4}" x2="{left + plot_w + 28}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{left + plot_w + 33}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{escape(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
