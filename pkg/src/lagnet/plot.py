"""Dependency-free SVG line charts with byte-stable output."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#222222", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")
MARGIN = (60, 20, 30, 50)  # left, right, top, bottom


@dataclass(frozen=True)
class PlotSpec:
    actual: Sequence[float]
    predicted: Mapping[str, Sequence[float]]
    actual_label: str = "actual"
    width: int = 900
    height: int = 400
    title: str = ""
    x_start: int = 0
    description: str = ""

    def validate(self) -> None:
        if not self.predicted:
            raise ValueError("plot needs at least one predicted series")
        n = len(self.actual)
        if n == 0:
            raise ValueError("cannot plot zero-length series")
        for label, s in self.predicted.items():
            if len(s) != n:
                raise ValueError(f"series {label!r} has length {len(s)}, actual has {n}")
        if self.width < 100 or self.height < 100:
            raise ValueError("plot must be at least 100x100 pixels")


def _num(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def render_svg(spec: PlotSpec) -> str:
    spec.validate()
    series = [(spec.actual_label, np.asarray(spec.actual, dtype=float))]
    series += [(k, np.asarray(v, dtype=float)) for k, v in spec.predicted.items()]
    n = series[0][1].size

    ymin = min(float(s.min()) for _, s in series)
    ymax = max(float(s.max()) for _, s in series)
    span = ymax - ymin if ymax > ymin else max(abs(ymax), 1.0)
    ymin, ymax = ymin - 0.05 * span, ymax + 0.05 * span
    left, right, top, bottom = MARGIN
    pw = spec.width - left - right
    ph = spec.height - top - bottom

    def sx(i: float) -> float:
        return left + (pw * i / (n - 1) if n > 1 else pw / 2)

    def sy(v: float) -> float:
        return top + ph * (ymax - v) / (ymax - ymin)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{spec.width}" height="{spec.height}" '
        f'viewBox="0 0 {spec.width} {spec.height}">',
    ]
    if spec.description:
        out.append(f"<desc>{escape(spec.description)}</desc>")
    out.append(f'<rect x="0" y="0" width="{spec.width}" height="{spec.height}" fill="white"/>')
    if spec.title:
        out.append(
            f'<text x="{_num(left + pw / 2)}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{escape(spec.title)}</text>'
        )
    out.append(
        f'<path d="M{left},{top} V{top + ph} H{left + pw}" fill="none" stroke="#000" stroke-width="1"/>'
    )
    for v in _ticks(ymin, ymax):
        y = _num(sy(v))
        out.append(f'<line x1="{left - 4}" y1="{y}" x2="{left}" y2="{y}" stroke="#000"/>')
        out.append(
            f'<text x="{left - 6}" y="{y}" text-anchor="end" dominant-baseline="middle" '
            f'font-family="sans-serif" font-size="10">{v:.4g}</text>'
        )
    for i in sorted({round(t) for t in _ticks(0, n - 1)}):
        x = _num(sx(i))
        out.append(f'<line x1="{x}" y1="{top + ph}" x2="{x}" y2="{top + ph + 4}" stroke="#000"/>')
        out.append(
            f'<text x="{x}" y="{top + ph + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{spec.x_start + i}</text>'
        )
    for j, (label, s) in enumerate(series):
        color = PALETTE[j % len(PALETTE)]
        pts = " ".join(f"{_num(sx(i))},{_num(sy(v))}" for i, v in enumerate(s))
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2">'
            f"<title>{escape(label)}</title></polyline>"
        )
    for j, (label, _) in enumerate(series):
        color = PALETTE[j % len(PALETTE)]
        y = top + 10 + 16 * j
        x = left + pw - 150
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(
            f'<text x="{x + 26}" y="{y}" dominant-baseline="middle" font-family="sans-serif" '
            f'font-size="11">{escape(label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(spec: PlotSpec, path) -> Path:
    """Validate, render and write the chart; nothing is written if validation fails."""
    text = render_svg(spec)
    path = Path(path)
    path.write_text(text, encoding="utf-8")
    return path
