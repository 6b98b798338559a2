"""Minimal self-contained SVG log-log plots.

Output depends only on the data, so identical inputs give identical bytes.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

COLORS = ("#1f5fa8", "#c0392b", "#27864a", "#8e44ad", "#d35400", "#555555")
WIDTH, HEIGHT = 560, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _decades(lo: float, hi: float) -> tuple:
    a = math.floor(math.log10(lo))
    b = math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return a, b


def loglog_svg(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
               notes=()) -> str:
    """Render ``{label: (x, y)}`` on log axes; non-positive points are skipped.

    ``notes`` are extra legend lines, e.g. fitted slopes.
    """
    pts = {name: [(float(x), float(y)) for x, y in zip(xs, ys)
                  if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
           for name, (xs, ys) in series.items()}
    allx = [p[0] for v in pts.values() for p in v]
    ally = [p[1] for v in pts.values() for p in v]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>']
    pw = WIDTH - LEFT - RIGHT
    ph = HEIGHT - TOP - BOTTOM
    if not allx:
        out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT / 2}" text-anchor="middle">no positive data</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"
    xa, xb = _decades(min(allx), max(allx))
    ya, yb = _decades(min(ally), max(ally))

    def px(x):
        return LEFT + (math.log10(x) - xa) / (xb - xa) * pw

    def py(y):
        return TOP + ph - (math.log10(y) - ya) / (yb - ya) * ph

    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for e in range(xa, xb + 1):
        x = _fmt(LEFT + (e - xa) / (xb - xa) * pw)
        out.append(f'<line x1="{x}" y1="{TOP}" x2="{x}" y2="{TOP + ph}" stroke="#dddddd"/>')
        out.append(f'<text x="{x}" y="{TOP + ph + 16}" text-anchor="middle">1e{e}</text>')
    for e in range(ya, yb + 1):
        y = _fmt(TOP + ph - (e - ya) / (yb - ya) * ph)
        out.append(f'<line x1="{LEFT}" y1="{y}" x2="{LEFT + pw}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{e}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2})">{escape(ylabel)}</text>')
    legend = []
    for i, (name, p) in enumerate(pts.items()):
        color = COLORS[i % len(COLORS)]
        if p:
            path = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in p)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            for x, y in p:
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="{color}"/>')
        legend.append((name, color))
    for j, line in enumerate([n for n, _ in legend] + list(notes)):
        y = TOP + 14 + 15 * j
        color = legend[j][1] if j < len(legend) else "black"
        out.append(f'<text x="{LEFT + pw - 8}" y="{y}" text-anchor="end" fill="{color}">'
                   f'{escape(str(line))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
