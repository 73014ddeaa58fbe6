"""Minimal self-contained SVG plots: lines, bands, scatters, ticks, legend.

Just enough to render the benchmark figures without a plotting dependency.
Each series is a dict with ``name``, ``x``, ``y`` and optionally ``lo``/``hi``
band arrays or ``points=True`` to draw markers without a line.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 480
MARGIN = {"left": 72, "right": 24, "top": 44, "bottom": 56}
PALETTE = ["#1f6fb2", "#d95f02", "#2a9d5c", "#b03a83", "#7a6fca",
           "#8c6d31", "#3aa6b9", "#c4453c"]


def _nice_ticks(lo, hi, target=5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _log_ticks(lo, hi):
    ticks = []
    e = math.floor(math.log10(lo))
    while 10.0 ** e <= hi * 1.0000001:
        if 10.0 ** e >= lo * 0.9999999:
            ticks.append(10.0 ** e)
        e += 1
    return ticks or [lo, hi]


def _fmt(v):
    if v == 0:
        return "0"
    if 0.001 <= abs(v) < 10000:
        s = f"{v:.4g}"
    else:
        s = f"{v:.1e}"
    return s


class _Axis:
    def __init__(self, lo, hi, pixel_lo, pixel_hi, log=False):
        self.log = log and lo > 0
        if self.log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi <= lo:
            pad = max(abs(lo), 1.0) * 0.05
            lo, hi = lo - pad, hi + pad
        else:
            pad = (hi - lo) * 0.05
            lo, hi = lo - pad, hi + pad
        self.lo, self.hi = lo, hi
        self.plo, self.phi = pixel_lo, pixel_hi

    def px(self, v):
        if self.log:
            v = math.log10(max(v, 1e-300))
        frac = (v - self.lo) / (self.hi - self.lo)
        return self.plo + frac * (self.phi - self.plo)

    def ticks(self):
        if self.log:
            return _log_ticks(10.0 ** self.lo, 10.0 ** self.hi)
        return _nice_ticks(self.lo, self.hi)


def line_plot(path, series, title="", xlabel="", ylabel="",
              xlog=False, ylog=False):
    """Write a line/band/scatter chart for the given series to ``path``."""
    xs, ys = [], []
    for s in series:
        xs.extend(s["x"])
        ys.extend(s["y"])
        for key in ("lo", "hi"):
            if s.get(key) is not None:
                ys.extend(s[key])
    xs = [float(v) for v in xs if math.isfinite(v)]
    ys = [float(v) for v in ys if math.isfinite(v)]
    if not xs or not ys:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    if ylog and min(ys) <= 0:
        ylog = False
    if xlog and min(xs) <= 0:
        xlog = False
    ax = _Axis(min(xs), max(xs), MARGIN["left"], WIDTH - MARGIN["right"], xlog)
    ay = _Axis(min(ys), max(ys), HEIGHT - MARGIN["bottom"], MARGIN["top"], ylog)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" '
        f'font-size="15">{escape(title)}</text>',
    ]
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    for t in ax.ticks():
        px = ax.px(t)
        if not x0 - 0.5 <= px <= x1 + 0.5:
            continue
        out.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y1}" '
                   f'stroke="#ddd" stroke-width="1"/>')
        out.append(f'<text x="{px:.1f}" y="{y0 + 18}" text-anchor="middle">'
                   f'{_fmt(t)}</text>')
    for t in ay.ticks():
        py = ay.px(t)
        if not y1 - 0.5 <= py <= y0 + 0.5:
            continue
        out.append(f'<line x1="{x0}" y1="{py:.1f}" x2="{x1}" y2="{py:.1f}" '
                   f'stroke="#ddd" stroke-width="1"/>')
        out.append(f'<text x="{x0 - 8}" y="{py + 4:.1f}" text-anchor="end">'
                   f'{_fmt(t)}</text>')
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" '
               f'height="{y0 - y1}" fill="none" stroke="#444"/>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 12}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{(y0 + y1) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(y0 + y1) / 2})">'
               f'{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(ax.px(x), ay.px(y)) for x, y in zip(s["x"], s["y"])
               if math.isfinite(x) and math.isfinite(y)]
        if s.get("lo") is not None and s.get("hi") is not None:
            band = [(ax.px(x), ay.px(v)) for x, v in zip(s["x"], s["hi"])]
            band += [(ax.px(x), ay.px(v)) for x, v in zip(s["x"][::-1], s["lo"][::-1])]
            poly = " ".join(f"{px:.1f},{py:.1f}" for px, py in band)
            out.append(f'<polygon points="{poly}" fill="{color}" '
                       f'fill-opacity="0.15" stroke="none"/>')
        if not s.get("points"):
            poly = " ".join(f"{px:.1f},{py:.1f}" for px, py in pts)
            out.append(f'<polyline points="{poly}" fill="none" '
                       f'stroke="{color}" stroke-width="1.8"/>')
        for px, py in pts:
            out.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="2.4" '
                       f'fill="{color}"/>')
        ly = MARGIN["top"] + 10 + 16 * i
        lx = x1 - 150
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2.5"/>')
        out.append(f'<text x="{lx + 28}" y="{ly + 4}">{escape(str(s["name"]))}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return path
