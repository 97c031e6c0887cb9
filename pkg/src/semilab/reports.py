"""Deterministic CSV and SVG emission.

Floats are rendered with a fixed %.12g so reruns with the same config and
seed reproduce byte-identical files; every file records the config hash
and the seed in comment lines.
"""

from __future__ import annotations

import os


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, complex):
        return f"{v.real:.12g}{v.imag:+.12g}j"
    return str(v)


def write_csv(path: str, columns, rows, meta: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    lines = [f"# {k}={_fmt(v)}" for k, v in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def append_footer(path: str, label: str, rows) -> None:
    with open(path, "a", newline="\n") as fh:
        fh.write(f"# footer:{label}\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# minimal SVG plotting (line/scatter primitives only)


def _svg_header(w, h, title):
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
            f'viewBox="0 0 {w} {h}">',
            f'<title>{title}</title>',
            f'<rect width="{w}" height="{h}" fill="white"/>']


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    import math
    step = (hi - lo) / max(count - 1, 1)
    mag = 10 ** math.floor(math.log10(step))
    for mult in (1, 2, 5, 10):
        if mag * mult >= step:
            step = mag * mult
            break
    t0 = math.ceil(lo / step) * step
    out = []
    t = t0
    while t <= hi + 1e-12 * abs(step):
        out.append(t)
        t += step
    return out


def svg_xy_plot(path: str, series, xlabel: str, ylabel: str, title: str,
                meta: dict, logx: bool = False, logy: bool = False,
                width: int = 640, height: int = 480) -> None:
    """series: list of (label, xs, ys, color).  Data are plotted after an
    optional log10 transform; axes show the transformed coordinates."""
    import math

    def tx(v, log):
        return math.log10(v) if log else v

    pts = []
    for _, xs, ys, _ in series:
        pts += [(tx(x, logx), tx(y, logy)) for x, y in zip(xs, ys)]
    xs_all = [p[0] for p in pts]
    ys_all = [p[1] for p in pts]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    padx = 0.05 * (x1 - x0 or 1.0)
    pady = 0.05 * (y1 - y0 or 1.0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    out = _svg_header(width, height, title)
    out.append(f'<text x="{width/2:.1f}" y="20" text-anchor="middle" '
               f'font-size="14">{title}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
               f'stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.1f}" y1="{mt+ph}" x2="{px(t):.1f}" '
                   f'y2="{mt+ph+5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.1f}" y="{mt+ph+18}" text-anchor="middle" '
                   f'font-size="10">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ml-5}" y1="{py(t):.1f}" x2="{ml}" y2="{py(t):.1f}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{ml-8}" y="{py(t)+3:.1f}" text-anchor="end" '
                   f'font-size="10">{t:.3g}</text>')
    xl = f"log10 {xlabel}" if logx else xlabel
    yl = f"log10 {ylabel}" if logy else ylabel
    out.append(f'<text x="{ml+pw/2:.1f}" y="{height-10}" text-anchor="middle" '
               f'font-size="12">{xl}</text>')
    out.append(f'<text x="18" y="{mt+ph/2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 18 {mt+ph/2:.1f})">{yl}</text>')
    for li, (label, xs, ys, color) in enumerate(series):
        p = [(px(tx(x, logx)), py(tx(y, logy))) for x, y in zip(xs, ys)]
        poly = " ".join(f"{a:.2f},{b:.2f}" for a, b in p)
        out.append(f'<polyline points="{poly}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        for a, b in p:
            out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{ml+10}" y="{mt+16+14*li}" font-size="11" '
                   f'fill="{color}">{label}</text>')
    for k, v in meta.items():
        out.append(f'<!-- {k}={v} -->')
    out.append("</svg>")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
