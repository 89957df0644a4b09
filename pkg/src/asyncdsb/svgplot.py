"""Minimal native SVG emission for line plots and heatmaps.

Deterministic text output: fixed canvas geometry, fixed palette, and fixed
float formatting, so identical data always produces identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 55


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_plot(path: str | Path, series: list[tuple[str, np.ndarray, np.ndarray]],
              title: str = "", xlabel: str = "t", ylabel: str = "value",
              invert_x: bool = True) -> None:
    """Overlayed polylines; `series` is a list of (label, xs, ys) triples.

    invert_x draws larger x to the left, matching reverse-time reading order.
    """
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    y_lo, y_hi = float(ys_all.min()), float(ys_all.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(x):
        u = (x - x_lo) / (x_hi - x_lo)
        if invert_x:
            u = 1.0 - u
        return _ML + u * pw

    def py(y):
        return _MT + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" '
           'stroke="#333" stroke-width="1"/>']
    if title:
        out.append(f'<text x="{_W // 2}" y="24" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="15">{title}</text>')
    for tx in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{_fmt(px(tx))}" y1="{_MT + ph}" x2="{_fmt(px(tx))}" '
                   f'y2="{_MT + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(px(tx))}" y="{_MT + ph + 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{_fmt(tx)}</text>')
    for ty in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{_ML - 5}" y1="{_fmt(py(ty))}" x2="{_ML}" '
                   f'y2="{_fmt(py(ty))}" stroke="#333"/>')
        out.append(f'<text x="{_ML - 9}" y="{_fmt(py(ty) + 4)}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{_fmt(ty)}</text>')
    out.append(f'<text x="{_ML + pw // 2}" y="{_H - 12}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">{xlabel}</text>')
    out.append(f'<text x="18" y="{_MT + ph // 2}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13" '
               f'transform="rotate(-90 18 {_MT + ph // 2})">{ylabel}</text>')
    for idx, (label, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(f"{_fmt(px(float(x)))},{_fmt(py(float(y)))}"
                          for x, y in zip(xs, ys))
        out.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                   'stroke-width="1.5"/>')
        ly = _MT + 16 + 16 * idx
        out.append(f'<line x1="{_ML + pw - 130}" y1="{ly - 4}" x2="{_ML + pw - 105}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_ML + pw - 100}" y="{ly}" font-family="sans-serif" '
                   f'font-size="11">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


_HEAT_STOPS = np.array([
    [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]],
    dtype=float)


def _heat_color(u: float) -> str:
    u = min(max(u, 0.0), 1.0)
    pos = u * (len(_HEAT_STOPS) - 1)
    k = min(int(pos), len(_HEAT_STOPS) - 2)
    frac = pos - k
    rgb = _HEAT_STOPS[k] * (1 - frac) + _HEAT_STOPS[k + 1] * frac
    return "#{:02x}{:02x}{:02x}".format(*(int(round(v)) for v in rgb))


def heatmap(path: str | Path, matrix: np.ndarray, row_labels: list[str],
            col_labels: list[str], title: str = "",
            row_title: str = "", col_title: str = "") -> None:
    """Colored cell grid; NaN cells are drawn gray and labelled invalid."""
    matrix = np.asarray(matrix, dtype=float)
    n_rows, n_cols = matrix.shape
    cell = 72
    ml, mt = 90, 70
    w = ml + n_cols * cell + 30
    h = mt + n_rows * cell + 50
    finite = matrix[np.isfinite(matrix)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    span = hi - lo if hi > lo else 1.0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}">',
           f'<rect width="{w}" height="{h}" fill="white"/>']
    if title:
        out.append(f'<text x="{w // 2}" y="26" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="15">{title}</text>')
    if col_title:
        out.append(f'<text x="{ml + n_cols * cell // 2}" y="46" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">{col_title}</text>')
    if row_title:
        out.append(f'<text x="20" y="{mt + n_rows * cell // 2}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12" '
                   f'transform="rotate(-90 20 {mt + n_rows * cell // 2})">{row_title}</text>')
    for r in range(n_rows):
        out.append(f'<text x="{ml - 8}" y="{mt + r * cell + cell // 2 + 4}" '
                   f'text-anchor="end" font-family="sans-serif" font-size="11">'
                   f'{row_labels[r]}</text>')
        for c in range(n_cols):
            x, y = ml + c * cell, mt + r * cell
            v = matrix[r, c]
            if np.isfinite(v):
                fill = _heat_color((v - lo) / span)
                text = f"{v:.4g}"
                tcol = "#000" if (v - lo) / span > 0.55 else "#fff"
            else:
                fill, text, tcol = "#cccccc", "invalid", "#555"
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                       f'fill="{fill}" stroke="white"/>')
            out.append(f'<text x="{x + cell // 2}" y="{y + cell // 2 + 4}" '
                       f'text-anchor="middle" font-family="sans-serif" '
                       f'font-size="11" fill="{tcol}">{text}</text>')
    for c in range(n_cols):
        out.append(f'<text x="{ml + c * cell + cell // 2}" y="{mt - 8}" '
                   f'text-anchor="middle" font-family="sans-serif" font-size="11">'
                   f'{col_labels[c]}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
