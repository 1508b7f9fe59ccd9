"""Minimal SVG line and scatter plots (axes, ticks, legend)."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, k: int = 5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / k
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(t) for t in np.arange(start, hi + 0.5 * step, step) if t <= hi + 1e-12 * abs(step)]


def _fmt(t: float) -> str:
    return f"{t:.4g}"


def plot(series, path, title: str = "", xlabel: str = "", ylabel: str = "", width: int = 640, height: int = 420) -> Path:
    """Write an SVG file.

    ``series`` is a list of dicts with keys x, y, label and optional
    style ("line" or "points").
    """
    ml, mr, mt, mb = 70, 20, 36, 50
    xs = np.concatenate([np.asarray(s["x"], float) for s in series])
    ys = np.concatenate([np.asarray(s["y"], float) for s in series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    x0, x1 = (float(xs[ok].min()), float(xs[ok].max())) if ok.any() else (0.0, 1.0)
    y0, y1 = (float(ys[ok].min()), float(ys[ok].max())) if ok.any() else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    W, H = width - ml - mr, height - mt - mb

    def X(v):
        return ml + (v - x0) / (x1 - x0) * W

    def Y(v):
        return mt + (y1 - v) / (y1 - y0) * H

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{W}" height="{H}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{X(t):.2f}" y1="{mt + H}" x2="{X(t):.2f}" y2="{mt + H + 5}" stroke="black"/>')
        out.append(f'<text x="{X(t):.2f}" y="{mt + H + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ml - 5}" y1="{Y(t):.2f}" x2="{ml}" y2="{Y(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y(t) + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    if title:
        out.append(f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{ml + W / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{mt + H / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + H / 2})">{escape(ylabel)}</text>')
    for i, s in enumerate(series):
        col = s.get("color", _COLORS[i % len(_COLORS)])
        x, y = np.asarray(s["x"], float), np.asarray(s["y"], float)
        keep = np.isfinite(x) & np.isfinite(y)
        if s.get("style", "line") == "points":
            for a, b in zip(x[keep], y[keep]):
                out.append(f'<circle cx="{X(a):.2f}" cy="{Y(b):.2f}" r="2.5" fill="{col}"/>')
        else:
            pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(x[keep], y[keep]))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.8"/>')
        if s.get("label"):
            ly = mt + 16 + 16 * i
            out.append(f'<line x1="{ml + 10}" y1="{ly - 4}" x2="{ml + 28}" y2="{ly - 4}" stroke="{col}" stroke-width="2"/>')
            out.append(f'<text x="{ml + 34}" y="{ly}">{escape(s["label"])}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
