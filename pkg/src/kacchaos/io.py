"""CSV and SVG output.

CSV files are UTF-8, comma separated, with a header row and ``\\n`` line
endings; floats are written with 17 significant digits so they round-trip.
SVG charts are plain text with no external dependencies.
"""

import csv
import math
import os
from html import escape
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def snapshot_rows(snapshots):
    """Rows ``time,particle_index,velocity`` from 1D snapshots."""
    for s in snapshots:
        for i, v in enumerate(s.velocities):
            yield s.time, i, float(v)


def planar_snapshot_rows(snapshots):
    """Rows ``time,particle_index,vx,vy`` from ``(time, V)`` pairs."""
    for t, V in snapshots:
        for i, (x, y) in enumerate(V):
            yield t, i, float(x), float(y)


def write_saddle(path, sol):
    row = sol.as_row()
    return write_csv(path, list(row), [list(row.values())])


def write_kv(path, mapping):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in mapping.items():
            fh.write(f"{k}={fmt(v)}\n")
    return path


# -- SVG -----------------------------------------------------------------------

_W, _H, _PAD = 640, 400, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _scale(lo, hi, a, b, log=False):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        hi = lo + 1.0

    def f(x):
        x = math.log10(x) if log else x
        return a + (x - lo) / (hi - lo) * (b - a)

    return f


def _frame(title, xlabel, ylabel):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{_W / 2}" y="{_H - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{_H / 2}" text-anchor="middle" '
        f'transform="rotate(-90 15 {_H / 2})">{escape(ylabel)}</text>',
        f'<rect x="{_PAD}" y="{_PAD / 2}" width="{_W - 1.5 * _PAD}" height="{_H - 1.5 * _PAD - _PAD / 2}" '
        f'fill="none" stroke="black"/>',
    ]


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart(series, title="", xlabel="", ylabel="", logx=False):
    """SVG text for ``{label: (x, y, yerr or None)}`` polylines with error bars."""
    xs = [x for s in series.values() for x in s[0]]
    ys = []
    for _, y, err in series.values():
        for i, b in enumerate(y):
            e = err[i] if err is not None and np.isfinite(err[i]) else 0.0
            ys += [b - e, b + e]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(0.0, min(ys)), max(ys) * 1.1 or 1.0
    X = _scale(xlo, xhi, _PAD, _W - _PAD / 2, logx)
    Y = _scale(ylo, yhi, _H - _PAD, _PAD / 2)
    out = _frame(title, xlabel, ylabel)
    for t in _ticks(ylo, yhi):
        out.append(f'<text x="{_PAD - 5}" y="{Y(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    for x in sorted(set(xs)):
        out.append(f'<text x="{X(x):.1f}" y="{_H - _PAD + 15}" text-anchor="middle">{x:g}</text>')
    for n, (label, (x, y, err)) in enumerate(series.items()):
        c = _COLORS[n % len(_COLORS)]
        pts = " ".join(f"{X(a):.1f},{Y(b):.1f}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="2"/>')
        for i, (a, b) in enumerate(zip(x, y)):
            out.append(f'<circle cx="{X(a):.1f}" cy="{Y(b):.1f}" r="3" fill="{c}"/>')
            if err is not None and np.isfinite(err[i]):
                out.append(f'<line x1="{X(a):.1f}" x2="{X(a):.1f}" y1="{Y(b - err[i]):.1f}" '
                           f'y2="{Y(b + err[i]):.1f}" stroke="{c}"/>')
        out.append(f'<text x="{_W - _PAD}" y="{_PAD / 2 + 15 * (n + 1)}" text-anchor="end" '
                   f'fill="{c}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def histogram_overlay(samples, pdf, bins=60, title="", xlabel="v"):
    """SVG of a density-normalized histogram with a model density curve."""
    samples = np.asarray(samples, dtype=float)
    lo, hi = np.quantile(samples, [0.0005, 0.9995])
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi), density=True)
    grid = np.linspace(lo, hi, 200)
    dens = np.asarray(pdf(grid), dtype=float)
    top = max(counts.max(), dens.max()) * 1.1
    X = _scale(lo, hi, _PAD, _W - _PAD / 2)
    Y = _scale(0.0, top, _H - _PAD, _PAD / 2)
    out = _frame(title, xlabel, "density")
    for t in _ticks(0.0, top):
        out.append(f'<text x="{_PAD - 5}" y="{Y(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    for t in _ticks(lo, hi):
        out.append(f'<text x="{X(t):.1f}" y="{_H - _PAD + 15}" text-anchor="middle">{t:.3g}</text>')
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        out.append(f'<rect x="{X(a):.1f}" y="{Y(c):.1f}" width="{X(b) - X(a):.1f}" '
                   f'height="{Y(0) - Y(c):.1f}" fill="#9ecae1" stroke="white"/>')
    pts = " ".join(f"{X(a):.1f},{Y(b):.1f}" for a, b in zip(grid, dens))
    out.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def output_dir(default, env="KACCHAOS_OUTPUT_DIR"):
    return Path(os.environ.get(env) or default)
