"""CSV rows and minimal SVG line plots."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


class SvgPlot:
    """Tiny 2D plot: polylines and markers in data coordinates."""

    def __init__(self, width: int = 480, height: int = 360, margin: int = 40,
                 title: str = "", xlabel: str = "", ylabel: str = "", logy: bool = False):
        self.w, self.h, self.m = width, height, margin
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.logy = logy
        self.items = []

    def _y(self, y):
        y = np.asarray(y, dtype=float)
        return np.log10(np.maximum(y, 1e-300)) if self.logy else y

    def line(self, x, y, color: str = "black", width: float = 1.5):
        self.items.append(("line", np.asarray(x, float), self._y(y), color, width))

    def points(self, x, y, color: str = "red", r: float = 3.0):
        self.items.append(("pts", np.asarray(x, float), self._y(y), color, r))

    def _bounds(self):
        xs = np.concatenate([it[1] for it in self.items if len(it[1])] or [np.zeros(1)])
        ys = np.concatenate([it[2] for it in self.items if len(it[2])] or [np.zeros(1)])
        xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
        x0, x1 = (xs.min(), xs.max()) if len(xs) else (0.0, 1.0)
        y0, y1 = (ys.min(), ys.max()) if len(ys) else (0.0, 1.0)
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1
        return x0, x1, y0, y1

    def render(self) -> str:
        x0, x1, y0, y1 = self._bounds()
        m, w, h = self.m, self.w, self.h

        def px(x):
            return m + (x - x0) / (x1 - x0) * (w - 2 * m)

        def py(y):
            return h - m - (y - y0) / (y1 - y0) * (h - 2 * m)

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
               f'viewBox="0 0 {w} {h}">',
               f'<rect width="{w}" height="{h}" fill="white"/>',
               f'<rect x="{m}" y="{m}" width="{w - 2 * m}" height="{h - 2 * m}" '
               'fill="none" stroke="#999"/>']
        for kind, x, y, color, size in self.items:
            ok = np.isfinite(x) & np.isfinite(y)
            x, y = x[ok], y[ok]
            if kind == "line" and len(x) > 1:
                pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                           f'stroke-width="{size}"/>')
            elif kind == "pts":
                out += [f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="{size}" fill="{color}"/>'
                        for a, b in zip(x, y)]
        ylab = f"log10 {self.ylabel}" if self.logy else self.ylabel
        out.append(f'<text x="{w / 2}" y="{m / 2}" text-anchor="middle" font-size="13">'
                   f'{escape(self.title)}</text>')
        out.append(f'<text x="{w / 2}" y="{h - 8}" text-anchor="middle" font-size="11">'
                   f'{escape(self.xlabel)} [{x0:.3g}, {x1:.3g}]</text>')
        out.append(f'<text x="12" y="{h / 2}" font-size="11" transform="rotate(-90 12 {h / 2})" '
                   f'text-anchor="middle">{escape(ylab)} [{y0:.3g}, {y1:.3g}]</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.render())
