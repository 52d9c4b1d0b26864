"""Minimal static SVG charts: a class-coloured scatter and a multi-series line chart.

Every plotted point carries its data coordinates in ``data-x``/``data-y``
attributes (``repr`` formatted) so charts can be checked against the CSVs
they were drawn from.
"""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 640, 480
MARGIN = 60


def _range(v):
    v = np.asarray(v, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, xlim, ylim, title="", xlabel="", ylabel=""):
        self.xlim, self.ylim = xlim, ylim
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
            f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]
        x0, y0, x1, y1 = MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN // 2, MARGIN // 2
        self.parts.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
                          f'fill="none" stroke="black"/>')
        for t in np.linspace(*xlim, 5):
            px = self.px(t)
            self.parts.append(f'<text x="{px:.2f}" y="{y0 + 16}" text-anchor="middle">{t:.3g}</text>')
        for t in np.linspace(*ylim, 5):
            py = self.py(t)
            self.parts.append(f'<text x="{x0 - 6}" y="{py + 4:.2f}" text-anchor="end">{t:.3g}</text>')
        if title:
            self.parts.append(f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
        if xlabel:
            self.parts.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 18}" text-anchor="middle">{escape(xlabel)}</text>')
        if ylabel:
            self.parts.append(f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" '
                              f'transform="rotate(-90 16 {(y0 + y1) / 2})">{escape(ylabel)}</text>')

    def px(self, x):
        lo, hi = self.xlim
        return MARGIN + (x - lo) / (hi - lo) * (WIDTH - MARGIN - MARGIN // 2)

    def py(self, y):
        lo, hi = self.ylim
        return HEIGHT - MARGIN - (y - lo) / (hi - lo) * (HEIGHT - MARGIN - MARGIN // 2)

    def legend(self, entries):
        for i, (text, colour, marker) in enumerate(entries):
            y = MARGIN // 2 + 14 + 16 * i
            x = WIDTH - MARGIN // 2 - 150
            if marker == "line":
                self.parts.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 14}" y2="{y - 4}" stroke="{colour}" stroke-width="2"/>')
            else:
                fill = colour if marker == "filled" else "none"
                self.parts.append(f'<circle cx="{x + 7}" cy="{y - 4}" r="4" fill="{fill}" stroke="{colour}"/>')
            self.parts.append(f'<text x="{x + 20}" y="{y}">{escape(text)}</text>')

    def render(self) -> str:
        return '<?xml version="1.0" encoding="UTF-8"?>\n' + "\n".join(self.parts + ["</svg>"]) + "\n"


def scatter_svg(points, labels, synthetic=None, *, class_names: Mapping[int, str] | None = None,
                title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Two-column scatter; synthetic points hollow, originals filled."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("scatter needs an (n, 2) array")
    labels = np.asarray(labels)
    synthetic = np.zeros(len(pts), bool) if synthetic is None else np.asarray(synthetic, bool)
    cv = _Canvas(_range(pts[:, 0]), _range(pts[:, 1]), title, xlabel, ylabel)
    classes = list(np.unique(labels))
    colour = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(classes)}
    # originals drawn last so they stay visible
    for i in np.concatenate([np.flatnonzero(synthetic), np.flatnonzero(~synthetic)]):
        x, y = pts[i]
        c = colour[labels[i]]
        fill = "none" if synthetic[i] else c
        kind = "synthetic" if synthetic[i] else "original"
        cv.parts.append(f'<circle cx="{cv.px(x):.3f}" cy="{cv.py(y):.3f}" r="3" fill="{fill}" stroke="{c}" '
                        f'data-x="{float(x)!r}" data-y="{float(y)!r}" data-class="{labels[i]}" data-origin="{kind}"/>')
    names = class_names or {}
    entries = [(str(names.get(c, c)), colour[c], "filled") for c in classes]
    if synthetic.any():
        entries.append(("synthetic", "#555555", "hollow"))
    cv.legend(entries)
    return cv.render()


def line_chart_svg(series: Mapping[str, tuple[Sequence[float], Sequence[float]]], *,
                   baseline: float | None = None, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """One polyline per named series; an optional dashed horizontal baseline."""
    xs = np.concatenate([np.asarray(v[0], float) for v in series.values()]) if series else np.array([0.0])
    ys = np.concatenate([np.asarray(v[1], float) for v in series.values()]) if series else np.array([0.0])
    if baseline is not None:
        ys = np.append(ys, baseline)
    cv = _Canvas(_range(xs), _range(ys), title, xlabel, ylabel)
    entries = []
    for i, (name, (x, y)) in enumerate(series.items()):
        c = PALETTE[i % len(PALETTE)]
        x, y = np.asarray(x, float), np.asarray(y, float)
        path = " ".join(f"{cv.px(a):.3f},{cv.py(b):.3f}" for a, b in zip(x, y))
        cv.parts.append(f'<polyline points="{path}" fill="none" stroke="{c}" stroke-width="2" data-series={quoteattr(name)}/>')
        for a, b in zip(x, y):
            cv.parts.append(f'<circle cx="{cv.px(a):.3f}" cy="{cv.py(b):.3f}" r="2.5" fill="{c}" '
                            f'data-series={quoteattr(name)} data-x="{float(a)!r}" data-y="{float(b)!r}"/>')
        entries.append((name, c, "line"))
    if baseline is not None:
        py = cv.py(baseline)
        cv.parts.append(f'<line x1="{MARGIN}" y1="{py:.3f}" x2="{WIDTH - MARGIN // 2}" y2="{py:.3f}" '
                        f'stroke="gray" stroke-dasharray="6 4" data-baseline="{float(baseline)!r}"/>')
        entries.append(("baseline", "gray", "line"))
    cv.legend(entries)
    return cv.render()
