"""Dependency-free SVG line charts: temperature on the left axis, power (kW) on the right."""
from __future__ import annotations

import math
from html import escape

import numpy as np

WIDTH, HEIGHT = 760, 420
MARGIN = dict(left=64, right=64, top=36, bottom=48)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _nice_ticks(lo, hi, n=6):
    if not hi > lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.floor(lo / step)
    last = max(math.ceil(hi / step), first + 1)
    ticks = [round(k * step, 10) for k in range(first, last + 1)]
    return ticks[0], ticks[-1], ticks


def _fmt(v):
    return f"{v:.2f}"


def render(series, setpoint=None, handoff=None, title="", max_points=1500) -> str:
    """Overlay plot.

    ``series`` is a list of dicts with keys label, times (s), temps (degC)
    and optionally powers (W).  Power is drawn dashed against the right axis.
    ``handoff`` (s) draws a black vertical bar.
    """
    if not series:
        raise ValueError("nothing to plot")
    x0, y0 = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    t_hi = max(float(np.max(s["times"])) for s in series)
    t_lo = min(float(np.min(s["times"])) for s in series)
    temps = np.concatenate([np.asarray(s["temps"], float) for s in series])
    T_lo, T_hi = float(temps.min()), float(temps.max())
    if setpoint is not None:
        T_lo, T_hi = min(T_lo, setpoint), max(T_hi, setpoint)
    T_lo, T_hi, T_ticks = _nice_ticks(T_lo, T_hi)
    t_lo, t_hi, t_ticks = _nice_ticks(t_lo, t_hi)
    pow_series = [s for s in series if s.get("powers") is not None]
    if pow_series:
        p_all = np.concatenate([np.asarray(s["powers"], float) / 1000.0 for s in pow_series])
        P_lo, P_hi, P_ticks = _nice_ticks(0.0, float(p_all.max()))

    def sx(t):
        return x0 + (t - t_lo) / (t_hi - t_lo) * pw

    def sy(T):
        return y0 + ph - (T - T_lo) / (T_hi - T_lo) * ph

    def sp(P):
        return y0 + ph - (P - P_lo) / (P_hi - P_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for t in t_ticks:
        out.append(f'<line x1="{_fmt(sx(t))}" y1="{y0 + ph}" x2="{_fmt(sx(t))}" y2="{y0 + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(sx(t))}" y="{y0 + ph + 16}" text-anchor="middle">{t:g}</text>')
    for T in T_ticks:
        out.append(f'<line x1="{x0}" y1="{_fmt(sy(T))}" x2="{x0 + pw}" y2="{_fmt(sy(T))}" stroke="#eee"/>')
        out.append(f'<text x="{x0 - 6}" y="{_fmt(sy(T) + 4)}" text-anchor="end">{T:g}</text>')
    out.append(f'<text x="{x0 + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">time (s)</text>')
    out.append(f'<text transform="translate(16,{y0 + ph / 2:.1f}) rotate(-90)" text-anchor="middle">'
               'temperature (&#176;C)</text>')
    if pow_series:
        for P in P_ticks:
            out.append(f'<text x="{x0 + pw + 6}" y="{_fmt(sp(P) + 4)}">{P:g}</text>')
        out.append(f'<text transform="translate({WIDTH - 14},{y0 + ph / 2:.1f}) rotate(90)" '
                   'text-anchor="middle">power (kW)</text>')

    if setpoint is not None:
        out.append(f'<line x1="{x0}" y1="{_fmt(sy(setpoint))}" x2="{x0 + pw}" y2="{_fmt(sy(setpoint))}" '
                   'stroke="#777" stroke-dasharray="2,3"/>')
        out.append(f'<text x="{x0 + 4}" y="{_fmt(sy(setpoint) - 4)}" fill="#777">setpoint {setpoint:g}</text>')
    if handoff is not None:
        out.append(f'<line x1="{_fmt(sx(handoff))}" y1="{y0}" x2="{_fmt(sx(handoff))}" y2="{y0 + ph}" '
                   'stroke="black" stroke-width="2"/>')

    for i, s in enumerate(series):
        color = COLORS[i % len(COLORS)]
        t = np.asarray(s["times"], float)
        stride = max(1, int(math.ceil(t.size / max_points)))
        idx = np.r_[np.arange(0, t.size, stride), t.size - 1] if (t.size - 1) % stride else np.arange(0, t.size, stride)
        T = np.asarray(s["temps"], float)
        pts = " ".join(f"{_fmt(sx(t[k]))},{_fmt(sy(T[k]))}" for k in idx)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        if s.get("powers") is not None:
            P = np.asarray(s["powers"], float) / 1000.0
            pts = " ".join(f"{_fmt(sx(t[k]))},{_fmt(sp(P[k]))}" for k in idx)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" '
                       f'stroke-dasharray="5,3" points="{pts}"/>')
        ly = y0 + 14 + 14 * i
        out.append(f'<line x1="{x0 + pw - 150}" y1="{ly - 4}" x2="{x0 + pw - 130}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x0 + pw - 125}" y="{ly}">{escape(str(s.get("label", f"series {i}")))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
