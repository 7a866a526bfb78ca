"""Minimal deterministic SVG line charts for tracking traces.

No plotting dependency: charts are assembled as plain SVG text with
fixed layout and number formatting, so identical traces produce
byte-identical files.
"""

import numpy as np

from .errors import ValidationError

WIDTH, HEIGHT = 640, 260
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 46, 12, 28, 34
MODEL_COLORS = ("#d62728", "#1f77b4")


def _fmt(v):
    return f"{v:.6g}"


def _polyline(xs, ys, color, width):
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
            f'points="{pts}" />')


def render_line_chart(title, x_label, y_label, series, y_range=(0.0, 1.0)):
    """One SVG chart; ``series`` is a list of (label, color, y-values)."""
    if not series:
        raise ValidationError("chart needs at least one series")
    n = len(series[0][2])
    if n < 1 or any(len(s[2]) != n for s in series):
        raise ValidationError("all series must share one nonzero length")
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    y_lo, y_hi = y_range

    def sx(i):
        return MARGIN_L + (plot_w * i / max(n - 1, 1))

    def sy(v):
        v = min(max(float(v), y_lo), y_hi)
        return MARGIN_T + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white" />',
        f'<text x="{MARGIN_L}" y="18" font-family="sans-serif" font-size="13">{title}</text>',
    ]
    # axes
    x0, y0 = MARGIN_L, MARGIN_T + plot_h
    parts.append(f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="#444" />')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="#444" />')
    for tick in np.linspace(y_lo, y_hi, 5):
        ty = sy(tick)
        parts.append(f'<line x1="{x0 - 3}" y1="{_fmt(ty)}" x2="{x0}" y2="{_fmt(ty)}" stroke="#444" />')
        parts.append(f'<text x="{x0 - 6}" y="{_fmt(ty + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{_fmt(tick)}</text>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        i = frac * max(n - 1, 1)
        tx = sx(i)
        parts.append(f'<line x1="{_fmt(tx)}" y1="{y0}" x2="{_fmt(tx)}" y2="{y0 + 3}" stroke="#444" />')
        parts.append(f'<text x="{_fmt(tx)}" y="{y0 + 15}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{int(round(i))}</text>')
    parts.append(f'<text x="{x0 + plot_w // 2}" y="{HEIGHT - 6}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11">{x_label}</text>')
    parts.append(f'<text x="14" y="{MARGIN_T + plot_h // 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11" '
                 f'transform="rotate(-90 14 {MARGIN_T + plot_h // 2})">{y_label}</text>')
    xs = [sx(i) for i in range(n)]
    legend_x = MARGIN_L + 8
    for label, color, ys in series:
        parts.append(_polyline(xs, [sy(v) for v in ys], color, 1.2))
        parts.append(f'<line x1="{legend_x}" y1="{MARGIN_T + 8}" x2="{legend_x + 16}" '
                     f'y2="{MARGIN_T + 8}" stroke="{color}" stroke-width="2" />')
        parts.append(f'<text x="{legend_x + 20}" y="{MARGIN_T + 12}" '
                     f'font-family="sans-serif" font-size="10">{label}</text>')
        legend_x += 24 + 7 * len(label)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_trace_chart(trace, component, models):
    """Ground truth in black plus up to two model tracks for one component."""
    from .kinematics import COMPONENT_NAMES

    if len(models) > 2:
        raise ValidationError(f"at most 2 model tracks per chart, requested {len(models)}")
    idx = COMPONENT_NAMES.index(component)
    series = [("ground truth", "#000000", trace.truth[:, idx])]
    for color, name in zip(MODEL_COLORS, models):
        series.append((name, color, trace.preds[name][:, idx]))
    return render_line_chart(component, "frame", component, series)
