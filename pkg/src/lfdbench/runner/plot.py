"""Deterministic SVG line chart: mean normalized performance per algorithm
against demonstration budget, with ±1 standard-error bars."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

from .experiment import CSV_HEADER

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=64, right=120, top=24, bottom=48)
COLORS = {"HC": "#1f77b4", "RC": "#d62728"}
FALLBACK_COLORS = ("#2ca02c", "#9467bd", "#8c564b", "#e377c2")


class PlotError(ValueError):
    pass


def read_curves(csv_path: str | Path) -> dict[str, list[tuple[int, float, float, int]]]:
    """``{algorithm: [(budget, mean, stderr, count), ...]}`` from a results CSV.

    Rows with an error or a blank ``norm_perf`` are skipped.
    """
    values: dict[str, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    with open(csv_path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise PlotError(f"{csv_path}:1: expected header {','.join(CSV_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise PlotError(f"{csv_path}:{line}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            rec = dict(zip(CSV_HEADER, row))
            try:
                demos = int(rec["demos"])
                perf = float(rec["norm_perf"]) if rec["norm_perf"] else math.nan
            except ValueError as exc:
                raise PlotError(f"{csv_path}:{line}: {exc}") from None
            if not rec["algorithm"]:
                raise PlotError(f"{csv_path}:{line}: empty algorithm")
            if rec["error"] or not math.isfinite(perf):
                continue
            values[rec["algorithm"]][demos].append(perf)
    if not values:
        raise PlotError(f"{csv_path}: no data rows")
    curves = {}
    for algo in sorted(values):
        pts = []
        for n in sorted(values[algo]):
            xs = values[algo][n]
            mean = sum(xs) / len(xs)
            se = 0.0
            if len(xs) > 1:
                var = sum((x - mean) ** 2 for x in xs) / (len(xs) - 1)
                se = math.sqrt(var / len(xs))
            pts.append((n, mean, se, len(xs)))
        curves[algo] = pts
    return curves


def _f(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 10))
        t += step
    return out


def svg_chart(curves, title: str = "") -> str:
    xs = [p[0] for pts in curves.values() for p in pts]
    lows = [p[1] - p[2] for pts in curves.values() for p in pts]
    highs = [p[1] + p[2] for pts in curves.values() for p in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(lows), max(highs)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="16" text-anchor="middle">{_escape(title)}</text>')
    bottom, left = MARGIN["top"] + ph, MARGIN["left"]
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{_f(px(t))}" y1="{bottom}" x2="{_f(px(t))}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{_f(px(t))}" y="{bottom + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{_f(py(t))}" x2="{left}" y2="{_f(py(t))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_f(py(t) + 4)}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">demonstrations</text>')
    out.append(f'<text x="16" y="{MARGIN["top"] + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2})">normalized performance</text>')
    extra = iter(FALLBACK_COLORS * (1 + len(curves)))
    for i, (algo, pts) in enumerate(curves.items()):
        color = COLORS.get(algo) or next(extra)
        out.append(f'<g class="series" data-algorithm="{_escape(algo)}" stroke="{color}" fill="{color}">')
        if len(pts) > 1:
            path = " ".join(f"{_f(px(n))},{_f(py(m))}" for n, m, _, _ in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke-width="2"/>')
        for n, m, se, _ in pts:
            out.append(f'<circle cx="{_f(px(n))}" cy="{_f(py(m))}" r="3"/>')
            if se > 0:
                x, lo, hi = _f(px(n)), _f(py(m - se)), _f(py(m + se))
                out.append(f'<line class="errorbar" x1="{x}" y1="{lo}" x2="{x}" y2="{hi}"/>')
                for yy in (lo, hi):
                    out.append(f'<line x1="{_f(px(n) - 4)}" y1="{yy}" x2="{_f(px(n) + 4)}" y2="{yy}"/>')
        out.append("</g>")
        ly = MARGIN["top"] + 16 + 18 * i
        lx = left + pw + 16
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}">{_escape(algo)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def render_plot(csv_path: str | Path, output_path: str | Path, title: str = "") -> Path:
    curves = read_curves(csv_path)
    out = Path(output_path)
    out.write_text(svg_chart(curves, title))
    return out
