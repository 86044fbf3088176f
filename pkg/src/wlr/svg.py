"""Minimal SVG emitters for presentation plots (no plotting dependency)."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

_HEAD = '<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">\n'


def _diverging(v: float, vmax: float) -> str:
    if not math.isfinite(v) or vmax <= 0:
        return "#bbbbbb"
    t = max(-1.0, min(1.0, v / vmax))
    if t >= 0:
        r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
    else:
        r, g, b = int(255 * (1 + t)), int(255 * (1 + t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(path, values, row_labels, col_labels, title: str = "") -> None:
    """Rows x columns heatmap with a symmetric blue-white-red scale."""
    vals = np.asarray(values, dtype=float)
    nr, nc = vals.shape
    cell, left, top = 14, 110, 40
    w, h = left + nc * cell + 20, top + nr * cell + 40
    finite = vals[np.isfinite(vals)]
    vmax = float(np.abs(finite).max()) if finite.size else 0.0
    out = [_HEAD.format(w=w, h=h)]
    out.append(f'<text x="{left}" y="20" font-size="12">{escape(title)} (|max| = {vmax:.3g})</text>\n')
    for i in range(nr):
        out.append(f'<text x="4" y="{top + i * cell + 11}" font-size="9">{escape(str(row_labels[i]))}</text>\n')
        for j in range(nc):
            out.append(f'<rect x="{left + j * cell}" y="{top + i * cell}" width="{cell}" height="{cell}" '
                       f'fill="{_diverging(vals[i, j], vmax)}"/>\n')
    step = max(1, nc // 10)
    for j in range(0, nc, step):
        out.append(f'<text x="{left + j * cell}" y="{top + nr * cell + 14}" font-size="9">'
                   f'{escape(str(col_labels[j]))}</text>\n')
    out.append("</svg>\n")
    Path(path).write_text("".join(out), encoding="utf-8")


def contour_plot(path, trials, vertices, limits, title: str = "") -> None:
    """Trials (green correct, red incorrect) and the threshold polygon in mm."""
    size, pad = 360, 30
    lx, lz = limits

    def px(x, z):
        return pad + (x + lx) / (2 * lx) * size, pad + (lz - z) / (2 * lz) * size

    out = [_HEAD.format(w=size + 2 * pad, h=size + 2 * pad + 10)]
    out.append(f'<rect x="{pad}" y="{pad}" width="{size}" height="{size}" fill="none" stroke="#444"/>\n')
    cx, cz = px(0, 0)
    out.append(f'<line x1="{pad}" y1="{cz}" x2="{pad + size}" y2="{cz}" stroke="#ccc"/>\n')
    out.append(f'<line x1="{cx}" y1="{pad}" x2="{cx}" y2="{pad + size}" stroke="#ccc"/>\n')
    for t in trials:
        x, z = px(t.x_err_mm, t.z_err_mm)
        color = "#2a9d3a" if t.correct else "#d62828"
        out.append(f'<circle cx="{x:.2f}" cy="{z:.2f}" r="3" fill="{color}"/>\n')
    if len(vertices) >= 3:
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in (px(x, z) for x, z in vertices))
        out.append(f'<polygon points="{pts}" fill="none" stroke="#000" stroke-width="2"/>\n')
    out.append(f'<text x="{pad}" y="18" font-size="12">{escape(title)}</text>\n')
    out.append(f'<text x="{pad}" y="{size + 2 * pad + 5}" font-size="10">x error (mm), '
               f'range +/-{lx:g}; z error range +/-{lz:g}</text>\n')
    out.append("</svg>\n")
    Path(path).write_text("".join(out), encoding="utf-8")
