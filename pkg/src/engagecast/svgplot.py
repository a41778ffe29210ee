"""Minimal hand-rolled SVG line and bar charts.

Plots are conveniences for eyeballing runs; the CSV outputs are the
contract. No plotting dependency is worth carrying for two chart shapes.
"""

from __future__ import annotations

from typing import Mapping, Sequence

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo or 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def line_chart(
    x_labels: Sequence[str],
    series: Mapping[str, Sequence[float]],
    band: tuple[Sequence[float], Sequence[float]] | None = None,
    title: str = "",
    width: int = 860,
    height: int = 360,
) -> str:
    """Multi-line chart with an optional shaded band (e.g. truth +- std)."""
    margin = 50
    xs = list(range(len(x_labels)))
    all_values = [v for vals in series.values() for v in vals]
    if band:
        all_values += list(band[0]) + list(band[1])
    lo = min(0.0, min(all_values)) if all_values else 0.0
    hi = max(all_values) if all_values else 1.0
    px = _scale(xs, 0, max(len(xs) - 1, 1), margin, width - margin)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="#333"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        'stroke="#333"/>',
    ]

    def ys(vals):
        return _scale(vals, lo, hi, height - margin, margin)

    if band:
        upper, lower = ys(band[0]), ys(band[1])
        points = [f"{x:.1f},{y:.1f}" for x, y in zip(px, upper)]
        points += [f"{x:.1f},{y:.1f}" for x, y in zip(px[::-1], lower[::-1])]
        parts.append(
            f'<polygon points="{" ".join(points)}" fill="#bbbbbb" opacity="0.45"/>'
        )
    for i, (name, vals) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(px, ys(vals)))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 16 * i}" font-size="11" '
            f'fill="{color}">{name}</text>'
        )
    step = max(1, len(x_labels) // 12)
    for i in range(0, len(x_labels), step):
        parts.append(
            f'<text x="{px[i]:.1f}" y="{height - margin + 16}" font-size="9" '
            f'text-anchor="middle">{x_labels[i]}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        value = lo + frac * (hi - lo)
        y = height - margin - frac * (height - 2 * margin)
        parts.append(
            f'<text x="{margin - 6}" y="{y:.1f}" font-size="9" '
            f'text-anchor="end">{value:.1f}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def bar_chart(
    items: Sequence[tuple[str, float]],
    title: str = "",
    width: int = 720,
    bar_height: int = 22,
) -> str:
    """Horizontal bar chart, longest bar first (top-k importance style)."""
    margin_left = 240
    margin = 40
    height = margin * 2 + bar_height * len(items)
    top = max((v for _, v in items), default=1.0) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for i, (label, value) in enumerate(items):
        y = margin + i * bar_height
        bar = (value / top) * (width - margin_left - margin)
        parts.append(
            f'<rect x="{margin_left}" y="{y + 3}" width="{bar:.1f}" '
            f'height="{bar_height - 6}" fill="#ff7f0e"/>'
        )
        parts.append(
            f'<text x="{margin_left - 6}" y="{y + bar_height / 2 + 4}" font-size="11" '
            f'text-anchor="end">{label}</text>'
        )
        parts.append(
            f'<text x="{margin_left + bar + 4:.1f}" y="{y + bar_height / 2 + 4}" '
            f'font-size="10">{value:.4f}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
