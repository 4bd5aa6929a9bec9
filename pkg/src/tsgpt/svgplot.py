"""Dependency-free SVG line plots for forecast outputs."""

from __future__ import annotations

import numpy as np


def line_plot_svg(
    series: list[tuple[str, np.ndarray, np.ndarray, str, bool]],
    vline: float | None = None,
    title: str = "",
    width: int = 960,
    height: int = 380,
) -> str:
    """Render (name, x, y, color, dashed) series to an SVG string.

    Deterministic output for identical inputs: coordinates are formatted
    with a fixed precision and nothing depends on wall-clock or locale.
    """
    pad_l, pad_r, pad_t, pad_b = 56, 16, 28, 34
    xs = np.concatenate([np.asarray(x, dtype=np.float64) for _, x, _, _, _ in series])
    ys = np.concatenate([np.asarray(y, dtype=np.float64) for _, _, y, _, _ in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    sx = (width - pad_l - pad_r) / (x1 - x0)
    sy = (height - pad_t - pad_b) / (y1 - y0)

    def px(x):
        return pad_l + (x - x0) * sx

    def py(y):
        return height - pad_b - (y - y0) * sy

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{width - pad_l - pad_r}" '
        f'height="{height - pad_t - pad_b}" fill="none" stroke="#999"/>',
        f'<text x="{pad_l}" y="18">{title}</text>',
        f'<text x="6" y="{py(y0):.2f}">{y0:.4g}</text>',
        f'<text x="6" y="{py(y1) + 10:.2f}">{y1:.4g}</text>',
        f'<text x="{px(x0):.2f}" y="{height - 12}">{x0:.4g}</text>',
        f'<text x="{px(x1) - 30:.2f}" y="{height - 12}">{x1:.4g}</text>',
    ]
    if vline is not None and x0 <= vline <= x1:
        parts.append(
            f'<line x1="{px(vline):.2f}" y1="{pad_t}" x2="{px(vline):.2f}" '
            f'y2="{height - pad_b}" stroke="#444" stroke-dasharray="2,4"/>'
        )
        parts.append(f'<text x="{px(vline) + 4:.2f}" y="{pad_t + 12}">train length</text>')
    legend_y = pad_t + 14
    for name, x, y, color, dashed in series:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        dash = ' stroke-dasharray="6,3"' if dashed else ""
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        parts.append(f'<rect x="{width - 150}" y="{legend_y - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{width - 134}" y="{legend_y}">{name}</text>')
        legend_y += 16
    parts.append("</svg>")
    return "\n".join(parts)
