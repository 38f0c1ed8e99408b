"""Self-contained SVG line charts for curve CSVs.

No plotting dependency: the experiment runners can emit one small SVG per
curve file when the config asks for it.  Deterministic output (fixed
geometry, fixed formatting) so renders are byte-stable like the CSVs.
"""

WIDTH, HEIGHT = 640, 400
MARGIN = 50
PALETTE = ("#1f6f8b", "#d1495b", "#66a182", "#8d6a9f", "#edae49", "#30323d")


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo
    if span <= 0:
        span = 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def render_curves(path, x_label, y_label, series) -> None:
    """Write an SVG with one polyline per named series.

    series: list of (name, xs, ys) with y values expected in [0, 1].
    """
    xs_all = [x for _, xs, _ in series for x in xs]
    lo, hi = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="14">{x_label}</text>',
        f'<text x="16" y="{HEIGHT // 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 16 {HEIGHT // 2})">{y_label}</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = HEIGHT - MARGIN - tick * (HEIGHT - 2 * MARGIN)
        parts.append(
            f'<text x="{MARGIN - 8}" y="{y:.1f}" text-anchor="end" font-size="11">{tick:g}</text>'
        )
    for k, (name, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        px = _scale(xs, lo, hi, MARGIN, WIDTH - MARGIN)
        py = _scale(ys, 0.0, 1.0, HEIGHT - MARGIN, MARGIN)
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 16 * k}" font-size="11" '
            f'fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
