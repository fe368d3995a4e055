"""Hand-rolled SVG charts (line, bar, scatter) with no dependencies.

The CSV outputs are the contract; these charts are conveniences for eyeballs.
Everything is a pure function of its inputs, so repeated runs emit identical
bytes.
"""
from __future__ import annotations

import math

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2",
)
_MARGIN_LEFT = 72
_MARGIN_RIGHT = 20
_MARGIN_TOP = 36
_MARGIN_BOTTOM = 48


def _fmt(value: float) -> str:
    text = format(float(value), ".10g")
    return "0" if text in ("-0", "-0.0") else text


def _escape(text: str) -> str:
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _span(values, log: bool = False):
    finite = [float(v) for v in values if math.isfinite(v)]
    if log:
        finite = [v for v in finite if v > 0.0]
    if not finite:
        finite = [0.0, 1.0]
    lo, hi = min(finite), max(finite)
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Frame:
    """Maps data coordinates onto the pixel plot area and draws the axes."""

    def __init__(self, width, height, x_span, y_span, *, log_y=False):
        self.width, self.height = width, height
        self.x0, self.x1 = x_span
        self.y0, self.y1 = y_span
        self.log_y = log_y
        self.px0 = _MARGIN_LEFT
        self.px1 = width - _MARGIN_RIGHT
        self.py0 = height - _MARGIN_BOTTOM
        self.py1 = _MARGIN_TOP

    def x(self, value: float) -> float:
        frac = (float(value) - self.x0) / (self.x1 - self.x0)
        return self.px0 + frac * (self.px1 - self.px0)

    def y(self, value: float) -> float:
        value = float(value)
        if self.log_y:
            value = math.log10(value) if value > 0 else self.y0
        frac = (value - self.y0) / (self.y1 - self.y0)
        return self.py0 + frac * (self.py1 - self.py0)

    def _ticks(self, lo, hi, count=5):
        step = (hi - lo) / (count - 1)
        return [lo + i * step for i in range(count)]

    def axes(self, title, x_label, y_label):
        parts = [
            f'<rect x="{self.px0}" y="{self.py1}" '
            f'width="{self.px1 - self.px0}" height="{self.py0 - self.py1}" '
            'fill="none" stroke="#333" stroke-width="1"/>',
            f'<text x="{(self.px0 + self.px1) / 2}" y="20" '
            'text-anchor="middle" font-size="14">'
            f"{_escape(title)}</text>",
            f'<text x="{(self.px0 + self.px1) / 2}" y="{self.height - 10}" '
            'text-anchor="middle" font-size="12">'
            f"{_escape(x_label)}</text>",
            f'<text x="16" y="{(self.py0 + self.py1) / 2}" '
            'text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 16 {(self.py0 + self.py1) / 2})">'
            f"{_escape(y_label)}</text>",
        ]
        for tick in self._ticks(self.x0, self.x1):
            px = self.x(tick)
            parts.append(
                f'<line x1="{_fmt(px)}" y1="{self.py0}" x2="{_fmt(px)}" '
                f'y2="{self.py0 + 4}" stroke="#333"/>'
            )
            parts.append(
                f'<text x="{_fmt(px)}" y="{self.py0 + 18}" '
                f'text-anchor="middle" font-size="10">{_fmt(round(tick, 9))}</text>'
            )
        for tick in self._ticks(self.y0, self.y1):
            label = 10.0 ** tick if self.log_y else tick
            frac = (tick - self.y0) / (self.y1 - self.y0)
            py = self.py0 + frac * (self.py1 - self.py0)
            parts.append(
                f'<line x1="{self.px0 - 4}" y1="{_fmt(py)}" x2="{self.px0}" '
                f'y2="{_fmt(py)}" stroke="#333"/>'
            )
            parts.append(
                f'<text x="{self.px0 - 8}" y="{_fmt(py + 3)}" '
                f'text-anchor="end" font-size="10">{_fmt(float(f"{label:.3g}"))}</text>'
            )
        return parts


def _document(width, height, body, comment: str | None = None) -> str:
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    if comment:
        lines.append(f"<!-- {_escape(comment)} -->")
    lines.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    )
    lines.append('<rect width="100%" height="100%" fill="white"/>')
    lines.extend(body)
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def line_chart(
    x,
    y,
    *,
    title="",
    x_label="",
    y_label="",
    width=720,
    height=420,
    log_y=False,
    comment=None,
) -> str:
    """Polyline chart of y against x."""
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if len(xs) != len(ys) or not xs:
        raise ValueError("x and y must be equal-length and non-empty")
    frame = _Frame(width, height, _span(xs), _span(ys, log=log_y), log_y=log_y)
    body = frame.axes(title, x_label, y_label)
    points = " ".join(
        f"{_fmt(frame.x(px))},{_fmt(frame.y(py))}"
        for px, py in zip(xs, ys)
        if math.isfinite(py) and (not log_y or py > 0)
    )
    body.append(
        f'<polyline points="{points}" fill="none" '
        f'stroke="{_PALETTE[0]}" stroke-width="1.5"/>'
    )
    return _document(width, height, body, comment)


def bar_chart(
    labels,
    values,
    *,
    title="",
    x_label="",
    y_label="",
    width=720,
    height=420,
    comment=None,
) -> str:
    """Bar chart with one labeled bar per value."""
    values = [float(v) for v in values]
    labels = [str(v) for v in labels]
    if len(labels) != len(values) or not values:
        raise ValueError("labels and values must be equal-length and non-empty")
    lo, hi = _span(values + [0.0])
    frame = _Frame(width, height, (-0.6, len(values) - 0.4), (lo, hi))
    body = frame.axes(title, x_label, y_label)
    base = frame.y(0.0)
    for i, value in enumerate(values):
        left = frame.x(i - 0.35)
        right = frame.x(i + 0.35)
        top = frame.y(value)
        y0, y1 = (top, base) if value >= 0 else (base, top)
        body.append(
            f'<rect x="{_fmt(left)}" y="{_fmt(y0)}" '
            f'width="{_fmt(right - left)}" height="{_fmt(y1 - y0)}" '
            f'fill="{_PALETTE[i % len(_PALETTE)]}"/>'
        )
        body.append(
            f'<text x="{_fmt(frame.x(i))}" y="{frame.py0 + 32}" '
            f'text-anchor="middle" font-size="10">{_escape(labels[i])}</text>'
        )
    return _document(width, height, body, comment)


def scatter_chart(
    x,
    y,
    *,
    groups=None,
    title="",
    x_label="",
    y_label="",
    width=520,
    height=520,
    comment=None,
) -> str:
    """Scatter plot; ``groups`` assigns palette colors (e.g. residue class)."""
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    if len(xs) != len(ys) or not xs:
        raise ValueError("x and y must be equal-length and non-empty")
    if groups is None:
        groups = [0] * len(xs)
    groups = [int(g) for g in groups]
    if len(groups) != len(xs):
        raise ValueError("groups must match x and y in length")
    frame = _Frame(width, height, _span(xs), _span(ys))
    body = frame.axes(title, x_label, y_label)
    for px, py, group in zip(xs, ys, groups):
        body.append(
            f'<circle cx="{_fmt(frame.x(px))}" cy="{_fmt(frame.y(py))}" r="2.5" '
            f'fill="{_PALETTE[group % len(_PALETTE)]}" fill-opacity="0.7"/>'
        )
    return _document(width, height, body, comment)
