"""Minimal two-axis SVG plot of |S| and the coincidence probability against rotation frequency."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

from sagnacbell.bell import TSIRELSON, SweepRow

WIDTH, HEIGHT = 760, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 80, 30, 60
S_COLOR = "#1f77b4"
P_COLOR = "#ff7f0e"


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def sweep_svg(rows: Sequence[SweepRow], title: str = "") -> str:
    """Render |S| (left axis) and P (right axis) with the classical and Tsirelson bounds."""
    f_lo, f_hi = rows[0].f_hz, rows[-1].f_hz
    s_max = 3.0
    p_max = max(0.07, max(r.P_coincidence for r in rows) * 1.1)
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM

    def x(f):
        return LEFT + (f - f_lo) / (f_hi - f_lo) * plot_w

    def y_s(s):
        return TOP + (1 - s / s_max) * plot_h

    def y_p(p):
        return TOP + (1 - p / p_max) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')

    for f in _nice_ticks(f_lo, f_hi):
        xf = x(f)
        out.append(f'<line x1="{xf:.2f}" y1="{TOP + plot_h}" x2="{xf:.2f}" y2="{TOP + plot_h + 5}" stroke="black"/>')
        out.append(f'<text x="{xf:.2f}" y="{TOP + plot_h + 18}" text-anchor="middle">{f:g}</text>')
    for s in _nice_ticks(0.0, s_max):
        ys = y_s(s)
        out.append(f'<line x1="{LEFT - 5}" y1="{ys:.2f}" x2="{LEFT}" y2="{ys:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{ys + 4:.2f}" text-anchor="end" fill="{S_COLOR}">{s:g}</text>')
    for p in _nice_ticks(0.0, p_max):
        yp = y_p(p)
        xr = LEFT + plot_w
        out.append(f'<line x1="{xr}" y1="{yp:.2f}" x2="{xr + 5}" y2="{yp:.2f}" stroke="black"/>')
        out.append(f'<text x="{xr + 8}" y="{yp + 4:.2f}" fill="{P_COLOR}">{p:g}</text>')

    out.append(f'<text x="{LEFT + plot_w / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">'
               f'rotation frequency f (Hz)</text>')
    out.append(f'<text transform="translate(20 {TOP + plot_h / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle" fill="{S_COLOR}">|S|</text>')
    out.append(f'<text transform="translate({WIDTH - 20} {TOP + plot_h / 2:.1f}) rotate(90)" '
               f'text-anchor="middle" fill="{P_COLOR}">coincidence probability P</text>')

    for level, dash, label in ((2.0, "6 4", "|S| = 2"), (TSIRELSON, "2 3", "|S| = 2√2")):
        yl = y_s(level)
        out.append(f'<line class="bound" x1="{LEFT}" y1="{yl:.2f}" x2="{LEFT + plot_w}" '
                   f'y2="{yl:.2f}" stroke="gray" stroke-dasharray="{dash}"/>')
        out.append(f'<text x="{LEFT + 4}" y="{yl - 4:.2f}" fill="gray">{label}</text>')

    s_pts = " ".join(f"{x(r.f_hz):.2f},{y_s(r.S_abs):.2f}" for r in rows)
    p_pts = " ".join(f"{x(r.f_hz):.2f},{y_p(r.P_coincidence):.2f}" for r in rows)
    out.append(f'<polyline id="S" fill="none" stroke="{S_COLOR}" stroke-width="1.5" points="{s_pts}"/>')
    out.append(f'<polyline id="P" fill="none" stroke="{P_COLOR}" stroke-width="1.5" points="{p_pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
