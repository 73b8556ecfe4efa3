"""Dependency-free SVG line plots for run outputs.

Good enough for queue trajectories, travel-time curves, and residual decay:
auto-scaled axes with 1-2-5 ticks, one polyline per series, a small legend.
The output is plain SVG 1.1 with nothing exotic, so it renders anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .errors import ParameterError

__all__ = ["Series", "write_line_svg"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


@dataclass
class Series:
    x: list
    y: list
    label: str = ""

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ParameterError(
                f"series {self.label!r}: {len(self.x)} x values vs {len(self.y)} y"
            )
        if not self.x:
            raise ParameterError(f"series {self.label!r} is empty")


def _ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + step * 1e-9:
        out.append(0.0 if abs(t) < step * 1e-9 else t)
        t += step
    return out


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.6g}"


def write_line_svg(path, series: list[Series], *, title: str = "",
                   xlabel: str = "", ylabel: str = "",
                   width: int = 800, height: int = 500) -> None:
    if not series:
        raise ParameterError("nothing to plot")
    xs = [float(v) for s in series for v in s.x]
    ys = [float(v) for s in series for v in s.y]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    ypad = 0.05 * (yhi - ylo)
    ylo -= ypad
    yhi += ypad

    ml, mr, mt, mb = 70, 20, 40, 55
    pw, ph = width - ml - mr, height - mt - mb

    def px(x: float) -> float:
        return ml + (x - xlo) / (xhi - xlo) * pw

    def py(y: float) -> float:
        return mt + (yhi - y) / (yhi - ylo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2}" y="24" text-anchor="middle" '
            f'font-size="16" font-family="sans-serif">{escape(title)}</text>'
        )
    axis = f'stroke="#333" stroke-width="1"'
    parts.append(f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" {axis}/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" {axis}/>')
    for t in _ticks(xlo, xhi):
        x = px(t)
        parts.append(f'<line x1="{x:.1f}" y1="{mt + ph}" x2="{x:.1f}" y2="{mt + ph + 5}" {axis}/>')
        parts.append(
            f'<text x="{x:.1f}" y="{mt + ph + 20}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{_fmt(t)}</text>'
        )
    for t in _ticks(ylo, yhi):
        y = py(t)
        parts.append(f'<line x1="{ml - 5}" y1="{y:.1f}" x2="{ml}" y2="{y:.1f}" {axis}/>')
        parts.append(
            f'<text x="{ml - 9}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-size="11" font-family="sans-serif">{_fmt(t)}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle" '
            f'font-size="13" font-family="sans-serif">{escape(xlabel)}</text>'
        )
    if ylabel:
        cy = mt + ph / 2
        parts.append(
            f'<text x="18" y="{cy}" text-anchor="middle" font-size="13" '
            f'font-family="sans-serif" transform="rotate(-90 18 {cy})">'
            f'{escape(ylabel)}</text>'
        )
    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(
            f"{px(float(x)):.2f},{py(float(y)):.2f}" for x, y in zip(s.x, s.y)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'
        )
        if s.label:
            ly = mt + 16 + 16 * i
            parts.append(
                f'<line x1="{ml + pw - 150}" y1="{ly - 4}" x2="{ml + pw - 125}" '
                f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
            )
            parts.append(
                f'<text x="{ml + pw - 118}" y="{ly}" font-size="12" '
                f'font-family="sans-serif">{escape(s.label)}</text>'
            )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
