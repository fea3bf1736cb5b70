"""CSV and SVG emission.

CSV conventions: header row, comma separation, 12 significant digits,
Unix newlines.  The SVG writer renders plain line plots without any
plotting dependency so the CLI stays self-contained.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

__all__ = ["fmt_float", "write_csv", "write_svg_lineplot"]


def fmt_float(x) -> str:
    """Format a value with 12 significant digits."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.11e}"


def write_csv(path, headers, columns):
    """Write columns of equal length as CSV with Unix newlines."""
    columns = [np.asarray(c) for c in columns]
    n = columns[0].shape[0]
    for c in columns:
        if c.shape[0] != n:
            raise ValueError("CSV columns must have equal length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(headers) + "\n")
        for i in range(n):
            fh.write(",".join(fmt_float(c[i]) for c in columns) + "\n")


def _ticks(lo: float, hi: float):
    if hi == lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, 5)


def write_svg_lineplot(path, x, ys, labels, title="", width=640, height=420):
    """Render one or more curves y(x) as an SVG polyline plot."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(y, dtype=float) for y in ys]
    margin = 56
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    x_lo, x_hi = float(x.min()), float(x.max())
    y_all = np.concatenate(ys)
    y_lo, y_hi = float(y_all.min()), float(y_all.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(v):
        return margin + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v):
        return height - margin - (v - y_lo) / (y_hi - y_lo) * plot_h

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#444"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="{margin / 2:.1f}" text-anchor="middle" '
            f'font-family="monospace" font-size="14">{title}</text>'
        )
    for tv in _ticks(x_lo, x_hi):
        parts.append(
            f'<text x="{sx(tv):.1f}" y="{height - margin + 18:.1f}" text-anchor="middle" '
            f'font-family="monospace" font-size="10">{tv:.3g}</text>'
        )
    for tv in _ticks(y_lo, y_hi):
        parts.append(
            f'<text x="{margin - 6:.1f}" y="{sy(tv) + 3:.1f}" text-anchor="end" '
            f'font-family="monospace" font-size="10">{tv:.3g}</text>'
        )
    for k, (y, label) in enumerate(zip(ys, labels)):
        color = colors[k % len(colors)]
        pts = " ".join(f"{sx(xx):.2f},{sy(yy):.2f}" for xx, yy in zip(x, y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{width - margin - 4:.1f}" y="{margin + 16 + 14 * k:.1f}" '
            f'text-anchor="end" font-family="monospace" font-size="11" '
            f'fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
