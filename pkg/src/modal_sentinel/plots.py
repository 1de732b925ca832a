"""Self-contained SVG figures drawn from polylines and primitives."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")
WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 70, "right": 150, "top": 40, "bottom": 55}


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if math.isfinite(v) else "0"


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    return f"{v:.3g}"


def _limits(values, pad: float = 0.05) -> tuple[float, float]:
    arr = np.asarray([v for v in values if math.isfinite(v)], dtype=float)
    if arr.size == 0:
        return 0.0, 1.0
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        span = abs(lo) if lo != 0 else 1.0
        return lo - 0.5 * span, hi + 0.5 * span
    span = hi - lo
    return lo - pad * span, hi + pad * span


class _Axes:
    """Linear map from data coordinates to the plotting rectangle."""

    def __init__(self, xlim, ylim, title: str, xlabel: str, ylabel: str, equal: bool = False):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.left = MARGIN["left"]
        self.right = WIDTH - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = HEIGHT - MARGIN["bottom"]
        if equal:
            # same data units per pixel on both axes
            sx = (self.x1 - self.x0) / (self.right - self.left)
            sy = (self.y1 - self.y0) / (self.bottom - self.top)
            s = max(sx, sy)
            cx, cy = 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)
            hw, hh = 0.5 * s * (self.right - self.left), 0.5 * s * (self.bottom - self.top)
            self.x0, self.x1, self.y0, self.y1 = cx - hw, cx + hw, cy - hh, cy + hh
        self.parts: list[str] = []
        self.legend: list[tuple[str, str, str]] = []
        self._frame(title, xlabel, ylabel)

    def px(self, x: float) -> float:
        return self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y: float) -> float:
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def _frame(self, title, xlabel, ylabel):
        p = self.parts
        p.append(f'<rect x="{self.left}" y="{self.top}" width="{self.right - self.left}" '
                 f'height="{self.bottom - self.top}" fill="none" stroke="#333"/>')
        for v in np.linspace(self.x0, self.x1, 5):
            x = _fmt(self.px(v))
            p.append(f'<line x1="{x}" y1="{self.bottom}" x2="{x}" y2="{self.bottom + 5}" stroke="#333"/>')
            p.append(f'<text x="{x}" y="{self.bottom + 18}" text-anchor="middle" '
                     f'font-size="11">{escape(_tick_label(v))}</text>')
        for v in np.linspace(self.y0, self.y1, 5):
            y = _fmt(self.py(v))
            p.append(f'<line x1="{self.left - 5}" y1="{y}" x2="{self.left}" y2="{y}" stroke="#333"/>')
            p.append(f'<text x="{self.left - 8}" y="{y}" text-anchor="end" dominant-baseline="middle" '
                     f'font-size="11">{escape(_tick_label(v))}</text>')
        mid_x = _fmt(0.5 * (self.left + self.right))
        mid_y = _fmt(0.5 * (self.top + self.bottom))
        p.append(f'<text x="{mid_x}" y="{self.top - 14}" text-anchor="middle" font-size="14">'
                 f'{escape(title)}</text>')
        p.append(f'<text x="{mid_x}" y="{HEIGHT - 15}" text-anchor="middle" font-size="12">'
                 f'{escape(xlabel)}</text>')
        p.append(f'<text x="18" y="{mid_y}" text-anchor="middle" font-size="12" '
                 f'transform="rotate(-90 18 {mid_y})">{escape(ylabel)}</text>')

    def polyline(self, x, y, color: str, label: str | None = None, dashed: bool = False,
                 width: float = 1.5):
        pts = " ".join(f"{_fmt(self.px(a))},{_fmt(self.py(b))}" for a, b in zip(x, y)
                       if math.isfinite(a) and math.isfinite(b))
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{dash}/>')
        if label:
            self.legend.append((label, color, "dash" if dashed else "line"))

    def markers(self, x, y, color: str, label: str | None = None, radius: float = 3.0):
        for a, b in zip(x, y):
            if math.isfinite(a) and math.isfinite(b):
                self.parts.append(f'<circle cx="{_fmt(self.px(a))}" cy="{_fmt(self.py(b))}" '
                                  f'r="{radius}" fill="{color}" fill-opacity="0.8"/>')
        if label:
            self.legend.append((label, color, "dot"))

    def bar(self, x_center: float, half_width: float, height: float, color: str):
        y_top, y_base = self.py(max(height, 0.0)), self.py(min(height, 0.0))
        self.parts.append(
            f'<rect x="{_fmt(self.px(x_center - half_width))}" y="{_fmt(y_top)}" '
            f'width="{_fmt(self.px(x_center + half_width) - self.px(x_center - half_width))}" '
            f'height="{_fmt(max(y_base - y_top, 0.0))}" fill="{color}"/>')

    def text(self, x: float, y: float, s: str, anchor: str = "middle"):
        self.parts.append(f'<text x="{_fmt(self.px(x))}" y="{_fmt(self.py(y))}" '
                          f'text-anchor="{anchor}" font-size="11">{escape(s)}</text>')

    def render(self) -> str:
        legend = []
        lx = self.right + 12
        for i, (label, color, style) in enumerate(self.legend):
            y = self.top + 12 + 18 * i
            if style == "dot":
                legend.append(f'<circle cx="{lx + 10}" cy="{y}" r="4" fill="{color}"/>')
            else:
                dash = ' stroke-dasharray="6 4"' if style == "dash" else ""
                legend.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 20}" y2="{y}" '
                              f'stroke="{color}" stroke-width="2"{dash}/>')
            legend.append(f'<text x="{lx + 26}" y="{y}" dominant-baseline="middle" '
                          f'font-size="11">{escape(label)}</text>')
        body = "\n".join(self.parts + legend)
        return (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">\n'
                f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n{body}\n</svg>\n')


def line_plot(series: Sequence[tuple], title: str, xlabel: str, ylabel: str) -> str:
    """``series`` holds (x, y, label) or (x, y, label, dashed) tuples."""
    xs = [v for s in series for v in np.asarray(s[0], dtype=float)]
    ys = [v for s in series for v in np.asarray(s[1], dtype=float)]
    ax = _Axes(_limits(xs, 0.0), _limits(ys), title, xlabel, ylabel)
    for i, s in enumerate(series):
        dashed = bool(s[3]) if len(s) > 3 else False
        ax.polyline(np.asarray(s[0], float), np.asarray(s[1], float),
                    PALETTE[i % len(PALETTE)], s[2], dashed)
    return ax.render()


def mode_overlay_plot(x, healthy: Sequence, current: Sequence, labels: Sequence[str],
                      title: str = "Mode shapes: healthy (solid) vs current (dashed)") -> str:
    x = np.asarray(x, dtype=float)
    xs, ys = list(x), [v for arr in (*healthy, *current) for v in np.asarray(arr, float)]
    ax = _Axes(_limits(xs, 0.0), _limits(ys), title, "position", "normalized shape")
    for i, (h, c, label) in enumerate(zip(healthy, current, labels)):
        color = PALETTE[i % len(PALETTE)]
        ax.polyline(x, h, color, label)
        ax.polyline(x, c, color, None, dashed=True)
    return ax.render()


def eigenvalue_plot(groups: Sequence[tuple], title: str = "DMD eigenvalues") -> str:
    """``groups`` holds (eigenvalues, label); a unit circle is drawn for reference."""
    re = [1.0, -1.0] + [float(z.real) for g in groups for z in g[0]]
    im = [1.0, -1.0] + [float(z.imag) for g in groups for z in g[0]]
    ax = _Axes(_limits(re), _limits(im), title, "Re(lambda)", "Im(lambda)", equal=True)
    t = np.linspace(0.0, 2.0 * math.pi, 241)
    ax.polyline(np.cos(t), np.sin(t), "#999999", "unit circle", width=1.0)
    for i, (eigs, label) in enumerate(groups):
        z = np.asarray(eigs, dtype=complex)
        ax.markers(z.real, z.imag, PALETTE[i % len(PALETTE)], label,
                   radius=3.5 if i == 0 else 2.5)
    return ax.render()


def bar_plot(categories: Sequence[str], groups: Sequence[tuple], title: str, ylabel: str) -> str:
    """Grouped bars; ``groups`` holds (label, values per category)."""
    n_cat, n_grp = len(categories), max(len(groups), 1)
    values = [float(v) for _, vals in groups for v in vals]
    lo, hi = _limits(values + [0.0])
    ax = _Axes((-0.5, n_cat - 0.5), (min(lo, 0.0), hi), title, "feature kind", ylabel)
    half = 0.8 / (2 * n_grp)
    for g, (label, vals) in enumerate(groups):
        color = PALETTE[g % len(PALETTE)]
        for c, v in enumerate(vals):
            ax.bar(c - 0.4 + half * (2 * g + 1), half * 0.9, float(v), color)
        ax.legend.append((label, color, "dot"))
    for c, name in enumerate(categories):
        ax.parts.append(f'<text x="{_fmt(ax.px(c))}" y="{ax.bottom - 6}" text-anchor="middle" '
                        f'font-size="11">{escape(name)}</text>')
    return ax.render()


def energy_plot(fractions, title: str = "Cumulative singular-value energy") -> str:
    f = np.asarray(fractions, dtype=float)
    ranks = np.arange(1, f.size + 1, dtype=float)
    ax = _Axes(_limits(ranks, 0.0), (0.0, 1.05), title, "rank", "cumulative energy")
    ax.polyline(ranks, f, PALETTE[0], "energy")
    ax.markers(ranks, f, PALETTE[0], radius=2.0)
    return ax.render()


def write_svg(path, svg: str) -> None:
    Path(path).write_text(svg, encoding="utf-8")
