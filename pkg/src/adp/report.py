"""Audit report serialization and SVG rendering.

Reports are plain dicts. Floats go through ``json`` which writes the
shortest round-trip representation, so ``parse(serialize(r)) == r``.
The SVG is a pure function of the report.
"""
from __future__ import annotations

import json
from xml.sax.saxutils import escape

import numpy as np

ENGINE_VERSION = "0.1.0"

N_TICKS = 5
# features whose span along the plot is below this (relative) are "not changing"
CHANGE_TOL = 1e-12

WIDTH, HEIGHT = 720, 460
LEFT, RIGHT, TOP, BOTTOM = 80, 30, 40, 120


def tick_indices(k: int, n: int = N_TICKS) -> list:
    return sorted({int(round(x)) for x in np.linspace(0, k - 1, n)})


def changing_features(points, names) -> list:
    """Indices of columns that vary along the plotted path."""
    span = points.max(axis=0) - points.min(axis=0)
    scale = np.maximum(1.0, np.abs(points).max(axis=0))
    return [j for j in range(len(names)) if span[j] > CHANGE_TOL * scale[j]]


def tick_labels(ts, points, names) -> list:
    """Changing-feature values at 5 evenly spaced gridpoints."""
    cols = changing_features(points, names)
    out = []
    for g in tick_indices(len(ts)):
        out.append({"index": g, "t": float(ts[g]),
                    "values": [[names[j], float(points[g, j])] for j in cols]})
    return out


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def from_json(text: str) -> dict:
    return json.loads(text)


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _polyline(xs, ys, style):
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
    return f'<polyline points="{pts}" fill="none" {style}/>'


def render_svg(report: dict) -> str:
    """Solid plot line, dotted reference line, target marker and tick labels."""
    ts = np.asarray(report["ts"], dtype=np.float64)
    fs = np.asarray(report["fs"], dtype=np.float64)
    hs = np.asarray(report["fit_values"], dtype=np.float64)
    lo = float(min(fs.min(), hs.min()))
    hi = float(max(fs.max(), hs.max()))
    if hi - lo < 1e-12 * max(1.0, abs(hi)):
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    a, b = float(ts[0]), float(ts[-1])
    pw = WIDTH - LEFT - RIGHT
    ph = HEIGHT - TOP - BOTTOM

    def sx(t):
        return LEFT + (t - a) / (b - a) * pw

    def sy(y):
        return TOP + (hi - y) / (hi - lo) * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
    ]
    title = f"utility {_fmt(report['utility'])} ({escape(report['utility_label'])})"
    parts.append(f'<text x="{LEFT}" y="{TOP - 14}">{title}</text>')
    for frac in (0.0, 0.5, 1.0):
        y = lo + frac * (hi - lo)
        parts.append(f'<text x="{LEFT - 8}" y="{sy(y) + 4:.3f}" text-anchor="end">{_fmt(y)}</text>')
    parts.append(_polyline([sx(t) for t in ts], [sy(y) for y in hs],
                           'stroke="#444" stroke-width="1.5" stroke-dasharray="2,3"'))
    parts.append(_polyline([sx(t) for t in ts], [sy(y) for y in fs],
                           'stroke="#1f4e9c" stroke-width="2"'))
    for tick in report["tick_labels"]:
        x = sx(tick["t"])
        parts.append(f'<line x1="{x:.3f}" y1="{TOP + ph}" x2="{x:.3f}" y2="{TOP + ph + 5}" stroke="#888"/>')
        lines = [f"{escape(str(name))}={_fmt(val)}" for name, val in tick["values"]] or [_fmt(tick["t"])]
        spans = "".join(f'<tspan x="{x:.3f}" dy="{0 if i == 0 else 13}">{s}</tspan>'
                        for i, s in enumerate(lines))
        parts.append(f'<text x="{x:.3f}" y="{TOP + ph + 18}" text-anchor="middle">{spans}</text>')
    t0 = report["target_t"]
    if a <= t0 <= b:
        x, y = sx(t0), sy(report["prediction"])
        parts.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="5" fill="#d62728"/>')
        parts.append(f'<text x="{x + 8:.3f}" y="{y - 8:.3f}" fill="#d62728">'
                     f'f(x0)={_fmt(report["prediction"])}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
