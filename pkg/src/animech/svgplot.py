"""Minimal SVG line plots so exported CSVs render without plotting deps."""

from __future__ import annotations

from pathlib import Path

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def line_plot(
    path: str | Path,
    x: np.ndarray,
    series: dict[str, np.ndarray],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 720,
    height: int = 360,
    hlines: dict[str, float] | None = None,
) -> None:
    margin = 56
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    all_y = np.concatenate(list(ys.values()) + [np.array(list((hlines or {}).values()) or [0.0])])
    x_lo, x_hi = float(np.min(x)), float(np.max(x))
    y_lo, y_hi = float(np.min(all_y)), float(np.max(all_y))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.05 * (y_hi - y_lo or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(v):
        return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width/2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{width/2}" y="{height-8}" text-anchor="middle" font-size="11">{x_label}</text>',
        f'<text x="14" y="{height/2}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {height/2})">{y_label}</text>',
        f'<rect x="{margin}" y="{margin}" width="{width-2*margin}" '
        f'height="{height-2*margin}" fill="none" stroke="#999"/>',
    ]
    for k in range(5):
        yv = y_lo + k * (y_hi - y_lo) / 4
        xv = x_lo + k * (x_hi - x_lo) / 4
        parts.append(
            f'<text x="{margin-6}" y="{sy(yv)+4}" text-anchor="end" font-size="10">{yv:.3g}</text>'
        )
        parts.append(
            f'<text x="{sx(xv)}" y="{height-margin+14}" text-anchor="middle" font-size="10">{xv:.3g}</text>'
        )
    for name, value in (hlines or {}).items():
        parts.append(
            f'<line x1="{margin}" y1="{sy(value)}" x2="{width-margin}" y2="{sy(value)}" '
            f'stroke="#888" stroke-dasharray="6 4"/>'
        )
        parts.append(
            f'<text x="{width-margin-4}" y="{sy(value)-4}" text-anchor="end" '
            f'font-size="10" fill="#666">{name}</text>'
        )
    for i, (name, y) in enumerate(ys.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{sx(px):.2f},{sy(py):.2f}" for px, py in zip(x, y))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{margin+8}" y="{margin+16+14*i}" font-size="11" '
            f'fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
