"""Learning-curve SVGs from metrics CSVs. Output bytes depend only on the inputs."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .data import FormatError

COLUMNS = ("epoch", "test_accuracy", "label_precision", "mean_train_loss", "wall_clock_s")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 60, 170, 20, 50


def read_series(path) -> list[dict]:
    """Parse a metrics CSV into rows of floats (None for empty cells)."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path}: line 1: empty file")
        if tuple(header) != COLUMNS:
            raise FormatError(f"{path}: line 1: expected header {','.join(COLUMNS)}")
        rows = []
        for line in reader:
            lineno = reader.line_num
            if not line:
                continue
            if len(line) != len(COLUMNS):
                raise FormatError(f"{path}: line {lineno}: expected {len(COLUMNS)} fields, got {len(line)}")
            try:
                rows.append({c: (float(v) if v != "" else None) for c, v in zip(COLUMNS, line)})
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: line 2: no data rows")
    return rows


def _polyline(points, colour) -> str:
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    return f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{coords}"/>'


def emit_chart(
    csv_paths: Sequence,
    output,
    metrics: Sequence[str] = ("test_accuracy",),
    labels: Sequence[str] | None = None,
    title: str = "",
) -> str:
    """Write an SVG line chart with one polyline per (file, metric) that has data; returns the SVG text."""
    for m in metrics:
        if m not in ("test_accuracy", "label_precision"):
            raise ValueError(f"cannot plot {m!r}")
    labels = list(labels) if labels else [Path(p).stem for p in csv_paths]
    series = []
    for path, label in zip(csv_paths, labels):
        rows = read_series(path)
        for m in metrics:
            pts = [(r["epoch"], r[m]) for r in rows if r[m] is not None]
            if pts:
                name = label if len(metrics) == 1 else f"{label} ({m.replace('_', ' ')})"
                series.append((name, pts))

    epochs = [x for _, pts in series for x, _ in pts] or [1.0]
    x_lo, x_hi = min(epochs), max(epochs)
    if x_hi == x_lo:
        x_hi = x_lo + 1
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return TOP + (1.0 - y) * plot_h

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{LEFT + plot_w / 2:.2f}" y="14" text-anchor="middle">{escape(title)}</text>')
    # axes and ticks
    out.append(f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{LEFT + plot_w}" y2="{TOP + plot_h}" stroke="black"/>')
    out.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>')
    for i in range(5):
        v = i / 4
        y = sy(v)
        out.append(f'<line x1="{LEFT - 4}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">{v:.2f}</text>')
    for i in range(5):
        x = x_lo + i * (x_hi - x_lo) / 4
        px = sx(x)
        out.append(f'<line x1="{px:.2f}" y1="{TOP + plot_h}" x2="{px:.2f}" y2="{TOP + plot_h + 4}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{TOP + plot_h + 16}" text-anchor="middle">{x:g}</text>')
    out.append(f'<text x="{LEFT + plot_w / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle">epoch</text>')
    ylabel = " / ".join(m.replace("_", " ") for m in metrics)
    out.append(
        f'<text x="14" y="{TOP + plot_h / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {TOP + plot_h / 2:.2f})">{escape(ylabel)}</text>'
    )
    for i, (name, pts) in enumerate(series):
        colour = PALETTE[i % len(PALETTE)]
        out.append(_polyline([(sx(x), sy(y)) for x, y in pts], colour))
        ly = TOP + 10 + 16 * i
        lx = LEFT + plot_w + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 22}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    Path(output).write_text(text)
    return text
