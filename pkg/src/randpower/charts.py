"""Static SVG line charts for grid results: one panel per (beta_x, n) with a
log-scaled R axis, one polyline per design, and 95% error bars. Output is
plain SVG text built deterministically, so regenerating from the same rows
yields byte-identical files."""

from __future__ import annotations

import math
import os

__all__ = ["emit_charts", "render_panel_svg"]

WIDTH = 640
HEIGHT = 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 160, 40, 50

PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
]


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


def render_panel_svg(panel: str, rows: list[dict], y_label: str = "power") -> str:
    """SVG for one panel; rows must share the panel key and carry
    design/R/power/se fields."""
    series: dict[str, list[tuple[int, float, float]]] = {}
    for row in rows:
        se = row["se"] if isinstance(row["se"], (int, float)) else 0.0
        if not (isinstance(row["power"], (int, float)) and math.isfinite(row["power"])):
            continue
        series.setdefault(row["design"], []).append((int(row["R"]), row["power"], se))
    if not series:
        raise ValueError(f"no plottable rows for panel {panel!r}")
    for pts in series.values():
        pts.sort()
    r_values = sorted({r for pts in series.values() for r, _, _ in pts})
    lo_x, hi_x = math.log10(r_values[0]), math.log10(r_values[-1])
    if hi_x == lo_x:
        hi_x = lo_x + 1.0
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(r):
        return MARGIN_L + (math.log10(r) - lo_x) / (hi_x - lo_x) * plot_w

    def sy(p):
        return MARGIN_T + (1.0 - min(max(p, 0.0), 1.0)) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{panel}</text>',
    ]
    # axes
    x0, y0 = MARGIN_L, MARGIN_T + plot_h
    out.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>'
    )
    out.append(f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for r in r_values:
        x = sx(r)
        out.append(f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 5}" stroke="black"/>')
        out.append(
            f'<text x="{_fmt(x)}" y="{y0 + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{r}</text>'
        )
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(tick)
        out.append(f'<line x1="{x0 - 5}" y1="{_fmt(y)}" x2="{x0}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(
            f'<text x="{x0 - 9}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick:g}</text>'
        )
    out.append(
        f'<text x="{x0 + plot_w // 2}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">R (log scale)</text>'
    )
    out.append(
        f'<text x="18" y="{MARGIN_T + plot_h // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 18 {MARGIN_T + plot_h // 2})">{y_label}</text>'
    )
    for idx, design in enumerate(sorted(series)):
        color = PALETTE[idx % len(PALETTE)]
        pts = series[design]
        path = " ".join(f"{_fmt(sx(r))},{_fmt(sy(p))}" for r, p, _ in pts)
        out.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for r, p, se in pts:
            x, y = sx(r), sy(p)
            out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{color}"/>')
            if se > 0:
                y_hi, y_lo = sy(p + 1.96 * se), sy(p - 1.96 * se)
                out.append(
                    f'<line x1="{_fmt(x)}" y1="{_fmt(y_hi)}" x2="{_fmt(x)}" '
                    f'y2="{_fmt(y_lo)}" stroke="{color}"/>'
                )
        ly = MARGIN_T + 16 * idx + 10
        lx = MARGIN_L + plot_w + 10
        out.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{lx + 24}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="11">{design}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_charts(rows: list[dict], output_dir: str) -> list[str]:
    """One SVG per panel (grouped by the `panel` column). Returns the file
    paths written, sorted."""
    rows = [r for r in rows if r.get("panel")]
    if not rows:
        raise ValueError("no data: results carry no panel column or are empty")
    os.makedirs(output_dir, exist_ok=True)
    panels: dict[str, list[dict]] = {}
    for row in rows:
        panels.setdefault(row["panel"], []).append(row)
    paths = []
    for panel in sorted(panels):
        name = panel.replace("=", "").replace(",", "_").replace(".", "p")
        path = os.path.join(output_dir, f"power_{name}.svg")
        svg = render_panel_svg(panel, panels[panel])
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
        paths.append(path)
    return paths
