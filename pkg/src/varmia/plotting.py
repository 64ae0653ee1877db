"""Standalone SVG ROC plots (no imaging dependency)."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#17becf")

SIZE = 400
MARGIN = 50


def to_canvas(fpr: float, tpr: float) -> tuple[float, float]:
    """Map ROC coordinates to SVG pixels (y axis flipped)."""
    return (MARGIN + fpr * SIZE, MARGIN + (1.0 - tpr) * SIZE)


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def plot_roc_svg(summaries, path) -> Path:
    """Write one polyline per named summary, a chance diagonal and a legend.

    ``summaries`` is a mapping or a list of ``(name, RocSummary)`` pairs.
    """
    items = list(summaries.items()) if hasattr(summaries, "items") else list(summaries)
    if not items:
        raise ValueError("nothing to plot")
    path = Path(path)
    W = SIZE + 2 * MARGIN + 180
    H = SIZE + 2 * MARGIN
    x0, y0 = to_canvas(0, 0)
    x1, y1 = to_canvas(1, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" '
        'fill="white" stroke="black"/>',
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y1)}" '
        'stroke="gray" stroke-dasharray="4,4"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        tx, _ = to_canvas(tick, 0)
        _, ty = to_canvas(0, tick)
        parts.append(f'<text x="{_fmt(tx)}" y="{_fmt(y0 + 18)}" font-size="11" '
                     f'text-anchor="middle">{tick:g}</text>')
        parts.append(f'<text x="{_fmt(x0 - 8)}" y="{_fmt(ty + 4)}" font-size="11" '
                     f'text-anchor="end">{tick:g}</text>')
    parts.append(f'<text x="{_fmt(MARGIN + SIZE / 2)}" y="{H - 8}" font-size="13" '
                 'text-anchor="middle">False positive rate</text>')
    parts.append(f'<text x="14" y="{_fmt(MARGIN + SIZE / 2)}" font-size="13" '
                 f'text-anchor="middle" transform="rotate(-90 14 {_fmt(MARGIN + SIZE / 2)})">'
                 'True positive rate</text>')
    for i, (name, summary) in enumerate(items):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(cx)},{_fmt(cy)}"
                       for cx, cy in (to_canvas(f, t) for f, t in summary.points))
        parts.append(f'<polyline class="roc" fill="none" stroke="{color}" '
                     f'stroke-width="2" points="{pts}"/>')
        ly = MARGIN + 20 + 20 * i
        lx = MARGIN + SIZE + 15
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text class="legend" x="{lx + 26}" y="{ly + 4}" font-size="12">'
                     f'{escape(str(name))} (AUC {summary.auc:.3f})</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
    return path
