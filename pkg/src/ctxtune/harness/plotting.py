"""Learning-curve SVGs from metrics.csv files or evaluation reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import ParseError
from .evaluation import EvalReport

WIDTH, HEIGHT = 640, 400
MARGIN = 50
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def read_metrics(path: str | Path) -> dict[int, list[tuple[int, float]]]:
    """Per-member ``(step, return)`` series from a metrics CSV."""
    series: dict[int, list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return series
        try:
            i_step, i_member, i_ret = header.index("step"), header.index("member"), header.index("return")
        except ValueError:
            raise ParseError("header must contain step, member and return columns", 1) from None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                step, member, ret = int(row[i_step]), int(row[i_member]), float(row[i_ret])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            series.setdefault(member, []).append((step, ret))
    return series


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(series: Mapping, title: str = "", xlabel: str = "environment steps", band: bool = False) -> str:
    """One polyline per series; with ``band`` also the mean and a ±1 standard-error band."""
    pts = [p for s in series.values() for p in s]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {HEIGHT / 2})">return</text>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{title}</text>')
    if pts:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x1 = x0 + 1
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1

        def sx(x):
            return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

        def sy(y):
            return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

        parts.append(f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10">{x0:g}</text>')
        parts.append(f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 15}" font-size="10" text-anchor="end">{x1:g}</text>')
        parts.append(f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" font-size="10" text-anchor="end">{y0:.0f}</text>')
        parts.append(f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" font-size="10" text-anchor="end">{y1:.0f}</text>')

        if band and len(series) > 1:
            steps = sorted({p[0] for s in series.values() for p in s})
            lookup = [dict(s) for s in series.values()]
            mean, lo, hi = [], [], []
            for st in steps:
                vals = np.array([d[st] for d in lookup if st in d])
                m = float(vals.mean())
                se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
                mean.append((st, m))
                lo.append((st, m - se))
                hi.append((st, m + se))
            poly = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in hi + lo[::-1])
            parts.append(f'<polygon class="band" points="{poly}" fill="#000000" fill-opacity="0.12" stroke="none"/>')
            line = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in mean)
            parts.append(f'<polyline class="mean" points="{line}" fill="none" stroke="black" stroke-width="2"/>')

        for k, (name, s) in enumerate(sorted(series.items(), key=lambda kv: str(kv[0]))):
            s = sorted(s)
            d = " ".join(("M" if i == 0 else "L") + f"{_fmt(sx(x))},{_fmt(sy(y))}" for i, (x, y) in enumerate(s))
            color = PALETTE[k % len(PALETTE)]
            parts.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"><title>{name}</title></path>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(source, out_path: str | Path, band: bool = False, title: str = "") -> Path:
    """Write a learning-curve SVG for a metrics CSV, a report JSON path, or an :class:`EvalReport`."""
    if isinstance(source, EvalReport):
        series = {f"seed {r.seed}": r.curve for r in source.results}
    else:
        path = Path(source)
        if path.suffix == ".json":
            try:
                report = EvalReport.from_json(json.loads(path.read_text()))
            except json.JSONDecodeError as exc:
                raise ParseError(str(exc), exc.lineno) from exc
            series = {f"seed {r.seed}": r.curve for r in report.results}
        else:
            series = {f"member {m}": s for m, s in read_metrics(path).items()}
    out = Path(out_path)
    out.write_text(render_svg(series, title=title, band=band))
    return out
