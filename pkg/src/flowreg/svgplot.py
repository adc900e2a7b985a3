"""Dependency-free SVG charts for the CLI's report files.

Output is plain SVG markup built from the input values alone: no
timestamps, no randomness, fixed float formatting.  That keeps emitted
files byte-identical across runs and diffable in version control.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart", "box_chart", "write_svg"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_MARGIN_LEFT = 64
_MARGIN_RIGHT = 20
_MARGIN_TOP = 34
_MARGIN_BOTTOM = 46


def _num(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def _tick_label(x: float) -> str:
    if x == 0:
        return "0"
    if abs(x) >= 1e4 or abs(x) < 1e-3:
        return f"{x:.2e}"
    return f"{x:.4g}"


def _bounds(values) -> tuple[float, float]:
    finite = [v for v in values if np.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        pad = 1.0 if lo == 0 else abs(lo) * 0.1
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, width, height, x_lo, x_hi, y_lo, y_hi):
        self.width = width
        self.height = height
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi
        self.plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
        self.plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def px(self, x: float) -> float:
        frac = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return _MARGIN_LEFT + frac * self.plot_w

    def py(self, y: float) -> float:
        frac = (y - self.y_lo) / (self.y_hi - self.y_lo)
        return _MARGIN_TOP + (1.0 - frac) * self.plot_h


def _frame(canvas: _Canvas, title: str, xlabel: str, ylabel: str) -> list[str]:
    c = canvas
    parts = [
        f'<rect x="{_MARGIN_LEFT}" y="{_MARGIN_TOP}" width="{_num(c.plot_w)}" '
        f'height="{_num(c.plot_h)}" fill="none" stroke="#333" stroke-width="1"/>'
    ]
    if title:
        parts.append(
            f'<text x="{_num(c.width / 2)}" y="20" text-anchor="middle" '
            f'font-size="14" font-family="sans-serif">{escape(title)}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{_num(_MARGIN_LEFT + c.plot_w / 2)}" y="{_num(c.height - 8)}" '
            f'text-anchor="middle" font-size="12" font-family="sans-serif">'
            f"{escape(xlabel)}</text>"
        )
    if ylabel:
        cx, cy = 14, _MARGIN_TOP + c.plot_h / 2
        parts.append(
            f'<text x="{_num(cx)}" y="{_num(cy)}" text-anchor="middle" '
            f'font-size="12" font-family="sans-serif" '
            f'transform="rotate(-90 {_num(cx)} {_num(cy)})">{escape(ylabel)}</text>'
        )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = c.x_lo + frac * (c.x_hi - c.x_lo)
        yv = c.y_lo + frac * (c.y_hi - c.y_lo)
        px, py = c.px(xv), c.py(yv)
        parts.append(
            f'<line x1="{_num(px)}" y1="{_num(_MARGIN_TOP + c.plot_h)}" '
            f'x2="{_num(px)}" y2="{_num(_MARGIN_TOP + c.plot_h + 4)}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{_num(px)}" y="{_num(_MARGIN_TOP + c.plot_h + 16)}" '
            f'text-anchor="middle" font-size="10" font-family="sans-serif">'
            f"{escape(_tick_label(xv))}</text>"
        )
        parts.append(
            f'<line x1="{_num(_MARGIN_LEFT - 4)}" y1="{_num(py)}" '
            f'x2="{_num(_MARGIN_LEFT)}" y2="{_num(py)}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{_num(_MARGIN_LEFT - 6)}" y="{_num(py + 3)}" '
            f'text-anchor="end" font-size="10" font-family="sans-serif">'
            f"{escape(_tick_label(yv))}</text>"
        )
    return parts


def line_chart(
    series,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 720,
    height: int = 480,
    identity_line: bool = False,
) -> str:
    """Render ``[(label, xs, ys), ...]`` as polylines with a legend."""
    xs_all, ys_all = [], []
    for _, xs, ys in series:
        xs_all.extend(np.asarray(xs, dtype=float).tolist())
        ys_all.extend(np.asarray(ys, dtype=float).tolist())
    x_lo, x_hi = _bounds(xs_all)
    y_lo, y_hi = _bounds(ys_all + xs_all if identity_line else ys_all)
    c = _Canvas(width, height, x_lo, x_hi, y_lo, y_hi)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    parts.extend(_frame(c, title, xlabel, ylabel))
    if identity_line:
        lo = max(x_lo, y_lo)
        hi = min(x_hi, y_hi)
        parts.append(
            f'<line x1="{_num(c.px(lo))}" y1="{_num(c.py(lo))}" '
            f'x2="{_num(c.px(hi))}" y2="{_num(c.py(hi))}" '
            f'stroke="#999" stroke-dasharray="5,4"/>'
        )
    for i, (label, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(
            f"{_num(c.px(float(x)))},{_num(c.py(float(y)))}"
            for x, y in zip(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
            if np.isfinite(x) and np.isfinite(y)
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{_num(_MARGIN_LEFT + 8)}" y="{_num(_MARGIN_TOP + 14 + 14 * i)}" '
            f'font-size="11" font-family="sans-serif" fill="{color}">'
            f"{escape(str(label))}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts)


def box_chart(
    groups,
    title: str = "",
    ylabel: str = "",
    width: int = 720,
    height: int = 480,
) -> str:
    """Render ``[(label, (min, q1, median, q3, max)), ...]`` as boxes."""
    values = [v for _, stats in groups for v in stats]
    y_lo, y_hi = _bounds(values)
    c = _Canvas(width, height, 0.0, float(len(groups)), y_lo, y_hi)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{_MARGIN_LEFT}" y="{_MARGIN_TOP}" width="{_num(c.plot_w)}" '
        f'height="{_num(c.plot_h)}" fill="none" stroke="#333" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_num(width / 2)}" y="20" text-anchor="middle" '
            f'font-size="14" font-family="sans-serif">{escape(title)}</text>'
        )
    if ylabel:
        cx, cy = 14, _MARGIN_TOP + c.plot_h / 2
        parts.append(
            f'<text x="{_num(cx)}" y="{_num(cy)}" text-anchor="middle" '
            f'font-size="12" font-family="sans-serif" '
            f'transform="rotate(-90 {_num(cx)} {_num(cy)})">{escape(ylabel)}</text>'
        )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = y_lo + frac * (y_hi - y_lo)
        py = c.py(yv)
        parts.append(
            f'<line x1="{_num(_MARGIN_LEFT - 4)}" y1="{_num(py)}" '
            f'x2="{_num(_MARGIN_LEFT)}" y2="{_num(py)}" stroke="#333"/>'
        )
        parts.append(
            f'<text x="{_num(_MARGIN_LEFT - 6)}" y="{_num(py + 3)}" '
            f'text-anchor="end" font-size="10" font-family="sans-serif">'
            f"{escape(_tick_label(yv))}</text>"
        )
    box_w = 0.5
    for i, (label, stats) in enumerate(groups):
        mn, q1, med, q3, mx = (float(s) for s in stats)
        color = _PALETTE[i % len(_PALETTE)]
        xm = i + 0.5
        x0, x1 = c.px(xm - box_w / 2), c.px(xm + box_w / 2)
        parts.append(
            f'<line x1="{_num(c.px(xm))}" y1="{_num(c.py(mn))}" '
            f'x2="{_num(c.px(xm))}" y2="{_num(c.py(mx))}" stroke="{color}"/>'
        )
        parts.append(
            f'<rect x="{_num(x0)}" y="{_num(c.py(q3))}" '
            f'width="{_num(x1 - x0)}" height="{_num(c.py(q1) - c.py(q3))}" '
            f'fill="{color}" fill-opacity="0.35" stroke="{color}"/>'
        )
        parts.append(
            f'<line x1="{_num(x0)}" y1="{_num(c.py(med))}" '
            f'x2="{_num(x1)}" y2="{_num(c.py(med))}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_num(c.px(xm))}" y="{_num(_MARGIN_TOP + c.plot_h + 16)}" '
            f'text-anchor="middle" font-size="10" font-family="sans-serif">'
            f"{escape(str(label))}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts)


def write_svg(path, svg_text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(svg_text)
        if not svg_text.endswith("\n"):
            fh.write("\n")
