"""Minimal static SVG line plots with byte-deterministic output."""
import math
from typing import Mapping, Sequence, Tuple, Union

import numpy as np

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 130, 30, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")

Curves = Union[Mapping[object, Tuple[Sequence[float], Sequence[float]]], Sequence]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _esc(text: str) -> str:
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _normalise(curves):
    items = list(curves.items()) if isinstance(curves, Mapping) else [(c[0], (c[1], c[2])) for c in curves]
    out = []
    for label, (x, y) in items:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape != y.shape or x.ndim != 1 or x.size == 0:
            raise ValueError(f"curve {label!r}: x and y must be equal-length non-empty 1-D arrays")
        out.append((label, x, y))
    return out


def render_svg(curves: Curves, log_x: bool = True, log_y: bool = True, title: str = "",
               x_label: str = "", y_label: str = "", legend_prefix: str = "p=") -> str:
    """One polyline per curve plus axes, tick labels and a legend."""
    items = _normalise(curves)
    if not items:
        raise ValueError("no curves to plot")

    def tx(v, log):
        if log:
            if v <= 0:
                raise ValueError("log axis needs positive values")
            return math.log10(v)
        return v

    xs = np.concatenate([[tx(v, log_x) for v in x] for _, x, _ in items])
    ys = np.concatenate([[tx(v, log_y) for v in y] for _, _, y in items])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(v):
        return _ML + (tx(v, log_x) - x0) / (x1 - x0) * pw

    def py(v):
        return _MT + ph - (tx(v, log_y) - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
           f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
           f'<line x1="{_ML}" y1="{_MT + ph}" x2="{_ML + pw}" y2="{_MT + ph}" stroke="black"/>',
           f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + ph}" stroke="black"/>']
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        vx = 10 ** fx if log_x else fx
        vy = 10 ** fy if log_y else fy
        gx = _ML + pw * k / 4
        gy = _MT + ph - ph * k / 4
        out.append(f'<text x="{_fmt(gx)}" y="{_MT + ph + 18}" font-size="11" text-anchor="middle">{vx:.3g}</text>')
        out.append(f'<text x="{_ML - 6}" y="{_fmt(gy + 4)}" font-size="11" text-anchor="end">{vy:.3g}</text>')
    if title:
        out.append(f'<text x="{_W // 2}" y="18" font-size="14" text-anchor="middle">{_esc(title)}</text>')
    if x_label:
        out.append(f'<text x="{_ML + pw // 2}" y="{_H - 8}" font-size="12" text-anchor="middle">{_esc(x_label)}</text>')
    if y_label:
        out.append(f'<text x="14" y="{_MT + ph // 2}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 14 {_MT + ph // 2})">{_esc(y_label)}</text>')
    for i, (label, x, y) in enumerate(items):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = _MT + 14 + 16 * i
        out.append(f'<line x1="{_W - _MR + 12}" y1="{ly - 4}" x2="{_W - _MR + 32}" y2="{ly - 4}" stroke="{color}"/>')
        out.append(f'<text x="{_W - _MR + 38}" y="{ly}" font-size="11">{_esc(f"{legend_prefix}{label}")}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(curves: Curves, path, **kwargs) -> None:
    """Render and write; nothing is written when rendering fails."""
    text = render_svg(curves, **kwargs)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc.strerror or exc}") from exc
