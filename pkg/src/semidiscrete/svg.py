"""Minimal deterministic SVG 1.1 line and scatter plots."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
          "#17becf", "#7f7f7f", "#bcbd22")


def _fmt(v: float) -> str:
    return format(v, ".2f")


def _tick_label(v: float) -> str:
    return format(v, ".3g")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * abs(hi):
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


class _Axes:
    def __init__(self, xlim, ylim, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = self._prep(xlim, logx)
        self.y0, self.y1 = self._prep(ylim, logy)

    @staticmethod
    def _prep(lim, log):
        lo, hi = (math.log10(lim[0]), math.log10(lim[1])) if log else lim
        if hi == lo:
            pad = abs(lo) * 0.05 or 1.0
            lo, hi = lo - pad, hi + pad
        return lo, hi

    def px(self, x: float) -> float:
        v = math.log10(x) if self.logx else x
        return LEFT + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)

    def py(self, y: float) -> float:
        v = math.log10(y) if self.logy else y
        return HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)

    def xticks(self):
        if self.logx:
            return [10.0**k for k in range(math.ceil(self.x0), math.floor(self.x1) + 1)]
        return _nice_ticks(self.x0, self.x1)

    def yticks(self):
        if self.logy:
            return [10.0**k for k in range(math.ceil(self.y0), math.floor(self.y1) + 1)]
        return _nice_ticks(self.y0, self.y1)


def _frame(ax: _Axes, title: str, xlabel: str, ylabel: str) -> list[str]:
    right, bottom = WIDTH - RIGHT, HEIGHT - BOTTOM
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{escape(title)}</text>',
        f'<rect class="frame" x="{LEFT}" y="{TOP}" width="{right - LEFT}" height="{bottom - TOP}" '
        'fill="none" stroke="black"/>',
    ]
    for t in ax.xticks():
        x = ax.px(t)
        out.append(f'<line class="tick" x1="{_fmt(x)}" y1="{bottom}" x2="{_fmt(x)}" y2="{bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{bottom + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{_tick_label(t)}</text>')
    for t in ax.yticks():
        y = ax.py(t)
        out.append(f'<line class="tick" x1="{LEFT - 5}" y1="{_fmt(y)}" x2="{LEFT}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{_tick_label(t)}</text>')
    out.append(f'<text x="{(LEFT + right) / 2:.0f}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{(TOP + bottom) / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="13" transform="rotate(-90 18 {(TOP + bottom) / 2:.0f})">{escape(ylabel)}</text>')
    return out


def _legend(labels) -> list[str]:
    out = []
    x = WIDTH - RIGHT + 15
    for i, label in enumerate(labels):
        y = TOP + 12 + 18 * i
        color = COLORS[i % len(COLORS)]
        out.append(f'<line class="legend" x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x + 26}" y="{y + 4}" font-family="sans-serif" font-size="12">{escape(label)}</text>')
    return out


def _finite_prefix(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    bad = ~np.isfinite(y)
    stop = int(np.argmax(bad)) if bad.any() else y.size
    return t[:stop], y[:stop]


def line_plot(series: dict, title: str, xlabel: str = "t", ylabel: str = "y") -> str:
    """One polyline per entry of ``series`` (label -> (t, y) or list of such pairs).

    Each path is drawn up to its first non-finite value.
    """
    curves = []
    for i, (label, data) in enumerate(series.items()):
        pairs = data if isinstance(data, list) else [data]
        for t, y in pairs:
            t, y = _finite_prefix(t, y)
            curves.append((i, label, t, y))
    pts_t = np.concatenate([c[2] for c in curves]) if curves else np.zeros(1)
    pts_y = np.concatenate([c[3] for c in curves]) if curves else np.zeros(1)
    if pts_t.size == 0:
        pts_t = pts_y = np.zeros(1)
    ax = _Axes((float(pts_t.min()), float(pts_t.max())), (float(pts_y.min()), float(pts_y.max())))
    out = _frame(ax, title, xlabel, ylabel)
    for i, label, t, y in curves:
        pts = " ".join(f"{_fmt(ax.px(a))},{_fmt(ax.py(b))}" for a, b in zip(t, y))
        out.append(f'<polyline class="series" data-label="{escape(label)}" fill="none" '
                   f'stroke="{COLORS[i % len(COLORS)]}" stroke-width="1.5" points="{pts}"/>')
    out += _legend(list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def convergence_plot(results: dict, title: str = "strong convergence") -> str:
    """Log-log scatter of (delta, error) per label plus its fitted power line.

    ``results`` maps label -> (deltas, errors, order, intercept).
    """
    xs, ys = [], []
    for deltas, errors, order, intercept in results.values():
        xs += list(deltas)
        ys += [e for e in errors if e > 0 and math.isfinite(e)]
    if not xs or not ys:
        xs, ys = [0.1, 1.0], [0.1, 1.0]
    ax = _Axes((min(xs) / 1.5, max(xs) * 1.5), (min(ys) / 2, max(ys) * 2), logx=True, logy=True)
    out = _frame(ax, title, "step size", "L2 error at T")
    for i, (label, (deltas, errors, order, intercept)) in enumerate(results.items()):
        color = COLORS[i % len(COLORS)]
        for d, e in zip(deltas, errors):
            if e > 0 and math.isfinite(e):
                out.append(f'<circle class="point" cx="{_fmt(ax.px(d))}" cy="{_fmt(ax.py(e))}" r="4" fill="{color}"/>')
        if math.isfinite(order):
            lo, hi = min(deltas), max(deltas)
            ends = [(d, math.exp(intercept) * d**order) for d in (lo, hi)]
            pts = " ".join(f"{_fmt(ax.px(d))},{_fmt(ax.py(e))}" for d, e in ends)
            out.append(f'<polyline class="fit" data-label="{escape(label)}" data-slope="{order:.17g}" '
                       f'fill="none" stroke="{color}" stroke-dasharray="6,4" points="{pts}"/>')
    out += _legend([f"{k} (order {v[2]:.3f})" for k, v in results.items()])
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
