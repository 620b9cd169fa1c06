"""Minimal SVG line charts (polylines with per-point markers)."""

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=170, top=40, bottom=50)


def _marker(kind, x, y, color, filled):
    fill = color if filled else "white"
    r = 4.0
    if kind == "circle":
        return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r}" fill="{fill}" stroke="{color}"/>'
    if kind == "square":
        return (f'<rect x="{x - r:.2f}" y="{y - r:.2f}" width="{2 * r}" height="{2 * r}" '
                f'fill="{fill}" stroke="{color}"/>')
    if kind == "triangle":
        pts = f"{x:.2f},{y - r - 1:.2f} {x - r - 1:.2f},{y + r:.2f} {x + r + 1:.2f},{y + r:.2f}"
    elif kind == "inverted_triangle":
        pts = f"{x:.2f},{y + r + 1:.2f} {x - r - 1:.2f},{y - r:.2f} {x + r + 1:.2f},{y - r:.2f}"
    else:
        return ""
    return f'<polygon points="{pts}" fill="{fill}" stroke="{color}"/>'


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * abs(hi):
        ticks.append(v)
        v += step
    return ticks


def line_chart(series, *, title="", xlabel="t", ylabel="", log_y=False):
    """Render ``series`` (dicts with name, x, y, marker, color, filled, dashed) as SVG text.

    Points with ``None``/non-finite y (or non-positive y on a log axis) are skipped.
    """
    def usable(v):
        return v is not None and math.isfinite(v) and (v > 0 or not log_y)

    xs = [x for s in series for x, y in zip(s["x"], s["y"]) if usable(y)]
    ys = [y for s in series for y in s["y"] if usable(y)]
    if not xs:
        xs, ys = [0.0, 1.0], [1.0, 2.0]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_hi = x_lo + 1
    fy = math.log10 if log_y else (lambda v: v)
    y_lo, y_hi = fy(min(ys)), fy(max(ys))
    if log_y:
        y_lo, y_hi = math.floor(y_lo), math.ceil(y_hi)
    if y_hi == y_lo:
        y_hi = y_lo + 1
    if not log_y:
        y_lo = min(y_lo, 0.0)

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return MARGIN["top"] + ph - (fy(y) - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for xt in _nice_ticks(x_lo, x_hi, n=min(8, max(1, int(x_hi - x_lo)))):
        X = px(xt)
        out.append(f'<line x1="{X:.2f}" y1="{MARGIN["top"] + ph}" x2="{X:.2f}" y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{xt:g}</text>')
    if log_y:
        yticks = [10.0**k for k in range(int(y_lo), int(y_hi) + 1)]
    else:
        yticks = _nice_ticks(y_lo, y_hi)
    for yt in yticks:
        Y = py(yt)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{Y:.2f}" x2="{MARGIN["left"] + pw}" y2="{Y:.2f}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{Y + 4:.2f}" text-anchor="end">{yt:g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        color = s.get("color", "black")
        filled = s.get("filled", False)
        pts = [(px(x), py(y)) for x, y in zip(s["x"], s["y"]) if usable(y)]
        if len(pts) > 1:
            dash = ' stroke-dasharray="5,3"' if s.get("dashed") else ""
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}"{dash}/>')
        out.extend(_marker(s.get("marker", "circle"), a, b, color, filled) for a, b in pts)
        ly = MARGIN["top"] + 12 + 20 * i
        lx = MARGIN["left"] + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}"/>')
        out.append(_marker(s.get("marker", "circle"), lx + 12, ly, color, filled))
        out.append(f'<text x="{lx + 32}" y="{ly + 4}">{escape(s["name"])}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
