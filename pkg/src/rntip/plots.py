"""
Minimal static SVG line charts, written directly without a plotting library.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#000000", "#8c564b"]


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: str | None = None
    width: float = 1.5
    dash: str | None = None
    markers: bool = False
    opacity: float = 1.0


@dataclass
class Figure:
    """One panel with linear axes."""

    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlim: tuple | None = None
    ylim: tuple | None = None
    width: int = 640
    height: int = 440
    series: list = field(default_factory=list)

    def line(self, x, y, **kw) -> "Figure":
        self.series.append(Series(np.asarray(x, float), np.asarray(y, float), **kw))
        return self

    def points(self, x, y, **kw) -> "Figure":
        kw.setdefault("markers", True)
        kw.setdefault("width", 0.0)
        return self.line(x, y, **kw)

    def _limits(self):
        xs = np.concatenate([s.x[np.isfinite(s.x)] for s in self.series] or [np.zeros(1)])
        ys = np.concatenate([s.y[np.isfinite(s.y)] for s in self.series] or [np.zeros(1)])
        xlim = self.xlim or (float(xs.min()), float(xs.max()))
        ylim = self.ylim or (float(ys.min()), float(ys.max()))
        if xlim[1] == xlim[0]:
            xlim = (xlim[0] - 1, xlim[1] + 1)
        if ylim[1] == ylim[0]:
            ylim = (ylim[0] - 1, ylim[1] + 1)
        return xlim, ylim

    def to_svg(self) -> str:
        left, right, top, bottom = 70, 20, 36, 50
        pw, ph = self.width - left - right, self.height - top - bottom
        (x0, x1), (y0, y1) = self._limits()

        def px(x):
            return left + (x - x0) / (x1 - x0) * pw

        def py(y):
            return top + (1.0 - (y - y0) / (y1 - y0)) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'font-family="sans-serif" font-size="12">',
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
            f'<defs><clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath></defs>',
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        ]
        for t in _nice_ticks(x0, x1):
            if x0 <= t <= x1:
                out.append(f'<line x1="{px(t):.1f}" y1="{top + ph}" x2="{px(t):.1f}" y2="{top + ph + 5}" stroke="black"/>')
                out.append(f'<text x="{px(t):.1f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
        for t in _nice_ticks(y0, y1):
            if y0 <= t <= y1:
                out.append(f'<line x1="{left - 5}" y1="{py(t):.1f}" x2="{left}" y2="{py(t):.1f}" stroke="black"/>')
                out.append(f'<text x="{left - 8}" y="{py(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
        out.append(f'<text x="{left + pw / 2}" y="{self.height - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {top + ph / 2})">{escape(self.ylabel)}</text>')
        out.append(f'<text x="{left + pw / 2}" y="22" text-anchor="middle" font-size="14">{escape(self.title)}</text>')
        out.append('<g clip-path="url(#plot)">')
        legend = []
        for i, s in enumerate(self.series):
            color = s.color or PALETTE[i % len(PALETTE)]
            ok = np.isfinite(s.x) & np.isfinite(s.y)
            if s.width > 0:
                # break the polyline at non-finite samples
                for seg in np.split(np.arange(s.x.size), np.nonzero(~ok)[0]):
                    seg = seg[ok[seg]]
                    if seg.size < 2:
                        continue
                    pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x[seg], s.y[seg]))
                    dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
                    out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                               f'stroke-width="{s.width}" stroke-opacity="{s.opacity}"{dash}/>')
            if s.markers:
                for a, b in zip(s.x[ok], s.y[ok]):
                    out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{color}" '
                               f'fill-opacity="{s.opacity}"/>')
            if s.label:
                legend.append((s.label, color))
        out.append("</g>")
        for k, (label, color) in enumerate(legend):
            yy = top + 14 + 16 * k
            out.append(f'<line x1="{left + pw - 150}" y1="{yy - 4}" x2="{left + pw - 130}" y2="{yy - 4}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{left + pw - 125}" y="{yy}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_svg())
