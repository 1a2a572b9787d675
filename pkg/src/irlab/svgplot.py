"""Minimal deterministic SVG line charts (log-log by default)."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2")


@dataclass(frozen=True)
class Series:
    label: str
    xs: tuple
    ys: tuple


def _usable(v: float, log: bool) -> bool:
    return math.isfinite(v) and (v > 0 or not log)


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        ticks = [10.0**k for k in range(a, b + 1) if lo <= 10.0**k <= hi]
        if len(ticks) < 2:
            ticks = sorted({lo, hi} | set(ticks))
        return ticks
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * k / 4 for k in range(5)]


def _label(v: float) -> str:
    return f"{v:.4g}"


def emit_svg_plot(
    series: Sequence[Series],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = True,
    logy: bool = True,
    notes: Sequence[str] = (),
) -> str:
    """Render line series as a standalone SVG document.

    Points that are non-finite (or non-positive on a log axis) are dropped.
    Raises ``ValueError`` unless some series keeps at least two points.
    """
    kept = []
    for s in series:
        pts = [(float(x), float(y)) for x, y in zip(s.xs, s.ys)
               if _usable(float(x), logx) and _usable(float(y), logy)]
        kept.append((s.label, pts))
    if not any(len(pts) >= 2 for _, pts in kept):
        raise ValueError("need at least two plottable rows")

    allx = [x for _, pts in kept for x, _ in pts]
    ally = [y for _, pts in kept for _, y in pts]
    fx = math.log10 if logx else (lambda v: v)
    fy = math.log10 if logy else (lambda v: v)
    x0, x1 = fx(min(allx)), fx(max(allx))
    y0, y1 = fy(min(ally)), fy(max(ally))
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(v: float) -> float:
        return LEFT + (fx(v) - x0) / (x1 - x0) * pw

    def py(v: float) -> float:
        return TOP + ph - (fy(v) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-logx="{str(logx).lower()}" data-logy="{str(logy).lower()}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    xmin, xmax, ymin, ymax = min(allx), max(allx), min(ally), max(ally)
    for t in _ticks(xmin, xmax, logx):
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{TOP + ph + 20}" text-anchor="middle" font-size="11">{_label(t)}</text>')
    for t in _ticks(ymin, ymax, logy):
        y = py(t)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{_label(t)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
    out.append(
        f'<text x="20" y="{TOP + ph / 2:.2f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 20 {TOP + ph / 2:.2f})">{escape(ylabel)}</text>'
    )

    lx = LEFT + pw + 15
    for k, (label, pts) in enumerate(kept):
        color = COLORS[k % len(COLORS)]
        if len(pts) >= 2:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
        ly = TOP + 15 + 18 * k
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 25}" y="{ly + 4}" font-size="11">{escape(label)}</text>')
    for j, note in enumerate(notes):
        ly = TOP + 15 + 18 * (len(kept) + j) + 6
        out.append(f'<text x="{lx}" y="{ly}" font-size="10" font-style="italic">{escape(note)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _parse(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        return math.nan


def plot_csv(
    text: str, x: str, ys: Sequence[str], logx: bool = True, logy: bool = True, title: str = ""
) -> str:
    """Plot columns of a CSV document; rows with a missing value in a column are skipped for that line."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("CSV has no data rows")
    for col in (x, *ys):
        if col not in rows[0]:
            raise ValueError(f"column {col!r} not in CSV header {list(rows[0])}")
    series, notes = [], []
    for col in ys:
        xs, vs, skipped = [], [], 0
        for r in rows:
            xv, yv = _parse(r[x]), _parse(r[col])
            if _usable(xv, logx) and _usable(yv, logy):
                xs.append(xv)
                vs.append(yv)
            else:
                skipped += 1
        series.append(Series(col, tuple(xs), tuple(vs)))
        if skipped:
            notes.append(f"{col}: {skipped} row(s) skipped (missing)")
    return emit_svg_plot(series, title=title, xlabel=x, ylabel=", ".join(ys), logx=logx, logy=logy, notes=notes)
