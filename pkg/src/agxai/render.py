"""Deterministic SVG rendering of trajectories and attribution beeswarms.

Writes SVG text directly: identical inputs produce identical bytes, so
rendered files can be committed and diffed. No plotting library sits in
between. Trajectory plots shade their background by trend verdict and
overlay either the penalized smooth (dashed, with its 95% band and a star
on the estimated peak) or the fitted line with slope significance stars.
Beeswarm plots give each ranked feature a horizontal lane of per-row
attribution points, jittered vertically with a seeded generator and colored
by the normalized raw feature value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .shap import BeeswarmData
from .trajectory_stats import RoundSeries, TrendClassification, Verdict


def _default_shading() -> dict:
    return {
        Verdict.INVERTED_U: "#e9e9e9",
        Verdict.NO_TREND: "#e4f2e4",
        Verdict.INCREASING: "#fcebd4",
        Verdict.DECREASING: "#dde9f7",
    }


@dataclass(frozen=True)
class PlotStyle:
    width: int = 800
    height: int = 500
    margin_left: int = 62
    margin_right: int = 24
    margin_top: int = 46
    margin_bottom: int = 54
    shading: dict = field(default_factory=_default_shading)
    point_color: str = "#20435c"
    peak_point_color: str = "#091d2c"
    curve_color: str = "#7a4bd0"
    band_color: str = "#7a4bd0"
    band_opacity: float = 0.18
    line_color: str = "#b34700"
    low_color: str = "#2770c9"
    high_color: str = "#d62753"
    jitter_seed: int = 7
    jitter_fraction: float = 0.33
    point_radius: float = 2.6
    font_family: str = "sans-serif"
    beeswarm_label_width: int = 240

    def __post_init__(self):
        missing = [v.value for v in Verdict if v not in self.shading]
        if missing:
            raise ValueError(f"shading must map every verdict; missing {missing}")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


class _Scale:
    def __init__(self, lo: float, hi: float, out_lo: float, out_hi: float):
        if hi <= lo:
            hi = lo + 1.0
        self.lo, self.hi = lo, hi
        self.out_lo, self.out_hi = out_lo, out_hi

    def __call__(self, v: float) -> float:
        frac = (v - self.lo) / (self.hi - self.lo)
        return self.out_lo + frac * (self.out_hi - self.out_lo)


def _svg_open(style: PlotStyle, background: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" '
        f'height="{style.height}" viewBox="0 0 {style.width} {style.height}" '
        f'font-family="{escape(style.font_family)}">',
        f'<rect class="background" x="0" y="0" width="{style.width}" '
        f'height="{style.height}" fill="{background}"/>',
    ]


def _axes(style: PlotStyle, xs: _Scale, ys: _Scale,
          x_ticks, y_ticks, x_label: str, y_label: str) -> list[str]:
    x0, x1 = xs.out_lo, xs.out_hi
    y0, y1 = ys.out_lo, ys.out_hi  # y0 is the bottom (larger pixel value)
    parts = [
        f'<line class="axis" x1="{_fmt(x0)}" y1="{_fmt(y0)}" '
        f'x2="{_fmt(x1)}" y2="{_fmt(y0)}" stroke="#333" stroke-width="1"/>',
        f'<line class="axis" x1="{_fmt(x0)}" y1="{_fmt(y0)}" '
        f'x2="{_fmt(x0)}" y2="{_fmt(y1)}" stroke="#333" stroke-width="1"/>',
    ]
    for tick in x_ticks:
        px = xs(tick)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(y0)}" x2="{_fmt(px)}" '
            f'y2="{_fmt(y0 + 4)}" stroke="#333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{_fmt(y0 + 17)}" font-size="11" '
            f'text-anchor="middle" fill="#333">{escape(f"{tick:g}")}</text>'
        )
    for tick in y_ticks:
        py = ys(tick)
        parts.append(
            f'<line x1="{_fmt(x0 - 4)}" y1="{_fmt(py)}" x2="{_fmt(x0)}" '
            f'y2="{_fmt(py)}" stroke="#333" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(x0 - 7)}" y="{_fmt(py + 3.5)}" font-size="11" '
            f'text-anchor="end" fill="#333">{escape(f"{tick:.1f}")}</text>'
        )
    mid_x = (x0 + x1) / 2
    parts.append(
        f'<text x="{_fmt(mid_x)}" y="{_fmt(y0 + 36)}" font-size="13" '
        f'text-anchor="middle" fill="#222">{escape(x_label)}</text>'
    )
    mid_y = (y0 + y1) / 2
    parts.append(
        f'<text x="16" y="{_fmt(mid_y)}" font-size="13" text-anchor="middle" '
        f'fill="#222" transform="rotate(-90 16 {_fmt(mid_y)})">'
        f'{escape(y_label)}</text>'
    )
    return parts


def _star_points(cx: float, cy: float, outer: float = 9.0,
                 inner: float = 3.8) -> str:
    pts = []
    for k in range(10):
        radius = outer if k % 2 == 0 else inner
        angle = -np.pi / 2 + k * np.pi / 5
        pts.append(f"{_fmt(cx + radius * np.cos(angle))},"
                   f"{_fmt(cy + radius * np.sin(angle))}")
    return " ".join(pts)


def plot_trajectory(series: RoundSeries, sems,
                    classification: TrendClassification,
                    style: PlotStyle | None = None,
                    title: str = "") -> str:
    """Round-trajectory SVG: SEM error bars, verdict-shaded background, and
    the winning model overlay (dashed smooth with band and peak star for an
    inverted U, annotated solid line otherwise)."""
    if style is None:
        style = PlotStyle()
    sems = np.asarray(sems, dtype=np.float64)
    if sems.shape != series.y.shape:
        raise ValueError("sems must align with the series")

    verdict = classification.verdict
    gam = classification.gam
    linear = classification.linear

    y_candidates = [series.y - sems, series.y + sems]
    if verdict is Verdict.INVERTED_U:
        y_candidates += [gam.lower, gam.upper]
    else:
        line_ends = linear.alpha0 + linear.alpha1 * series.x
        y_candidates.append(line_ends)
    y_lo = float(min(np.min(c) for c in y_candidates))
    y_hi = float(max(np.max(c) for c in y_candidates))
    pad = 0.06 * (y_hi - y_lo or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    xs = _Scale(float(series.x.min()) - 0.5, float(series.x.max()) + 0.5,
                style.margin_left, style.width - style.margin_right)
    ys = _Scale(y_lo, y_hi,
                style.height - style.margin_bottom, style.margin_top)

    parts = _svg_open(style, style.shading[verdict])
    if title:
        parts.append(
            f'<text class="title" x="{style.width // 2}" y="26" font-size="16" '
            f'text-anchor="middle" fill="#111">{escape(title)}</text>'
        )
    y_ticks = np.linspace(y_lo + pad, y_hi - pad, 5)
    parts += _axes(style, xs, ys, [int(v) for v in series.x], y_ticks,
                   "Refinement round", "Mean score")

    if verdict is Verdict.INVERTED_U:
        band = [f"{_fmt(xs(x))},{_fmt(ys(v))}"
                for x, v in zip(gam.grid_x, gam.upper)]
        band += [f"{_fmt(xs(x))},{_fmt(ys(v))}"
                 for x, v in zip(gam.grid_x[::-1], gam.lower[::-1])]
        parts.append(
            f'<polygon class="ci-band" points="{" ".join(band)}" '
            f'fill="{style.band_color}" fill-opacity="{style.band_opacity}" '
            f'stroke="none"/>'
        )
        curve = " ".join(
            f"{'M' if i == 0 else 'L'} {_fmt(xs(x))} {_fmt(ys(v))}"
            for i, (x, v) in enumerate(zip(gam.grid_x, gam.curve))
        )
        parts.append(
            f'<path class="gam-curve" d="{curve}" fill="none" '
            f'stroke="{style.curve_color}" stroke-width="2" '
            f'stroke-dasharray="7,4"/>'
        )
    else:
        x_ends = (float(series.x.min()), float(series.x.max()))
        fit_y = [linear.alpha0 + linear.alpha1 * v for v in x_ends]
        parts.append(
            f'<line class="fit-line" x1="{_fmt(xs(x_ends[0]))}" '
            f'y1="{_fmt(ys(fit_y[0]))}" x2="{_fmt(xs(x_ends[1]))}" '
            f'y2="{_fmt(ys(fit_y[1]))}" stroke="{style.line_color}" '
            f'stroke-width="2"/>'
        )
        stars = _significance_stars(linear.slope_p)
        annotation = (f"y = {linear.alpha0:.3f} + {linear.alpha1:.3f} x"
                      if linear.alpha1 >= 0 else
                      f"y = {linear.alpha0:.3f} - {abs(linear.alpha1):.3f} x")
        parts.append(
            f'<text class="fit-label" x="{style.margin_left + 10}" '
            f'y="{style.margin_top + 16}" font-size="13" fill="#222">'
            f'{escape(annotation + (" " + stars if stars else ""))}</text>'
        )

    peak_mean = float(series.y.max())
    for x, mean, sem in zip(series.x, series.y, sems):
        px, py = xs(float(x)), ys(float(mean))
        top, bottom = ys(float(mean + sem)), ys(float(mean - sem))
        fill = (style.peak_point_color if mean == peak_mean
                else style.point_color)
        parts.append(
            '<g class="errorbar">'
            f'<line x1="{_fmt(px)}" y1="{_fmt(top)}" x2="{_fmt(px)}" '
            f'y2="{_fmt(bottom)}" stroke="{style.point_color}" stroke-width="1.2"/>'
            f'<line x1="{_fmt(px - 4)}" y1="{_fmt(top)}" x2="{_fmt(px + 4)}" '
            f'y2="{_fmt(top)}" stroke="{style.point_color}" stroke-width="1.2"/>'
            f'<line x1="{_fmt(px - 4)}" y1="{_fmt(bottom)}" x2="{_fmt(px + 4)}" '
            f'y2="{_fmt(bottom)}" stroke="{style.point_color}" stroke-width="1.2"/>'
            f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3.4" fill="{fill}"/>'
            '</g>'
        )

    if verdict is Verdict.INVERTED_U:
        px = xs(classification.peak_round)
        py = ys(classification.peak_value)
        parts.append(
            f'<polygon class="peak-star" '
            f'points="{_star_points(px, py)}" fill="#f2b01e" '
            f'stroke="#7a5800" stroke-width="1"/>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _lerp_color(low: str, high: str, frac: float) -> str:
    lo = [int(low[i:i + 2], 16) for i in (1, 3, 5)]
    hi = [int(high[i:i + 2], 16) for i in (1, 3, 5)]
    mixed = [round(a + (b - a) * frac) for a, b in zip(lo, hi)]
    return "#{:02x}{:02x}{:02x}".format(*mixed)


def plot_beeswarm(data: BeeswarmData, style: PlotStyle | None = None,
                  title: str = "") -> str:
    """Attribution beeswarm SVG: one lane per ranked feature, top lane most
    influential. Vertical jitter comes from a generator seeded per lane by
    (style.jitter_seed, lane index), so layout is reproducible."""
    if style is None:
        style = PlotStyle()
    if not data.lanes:
        raise ValueError("beeswarm needs at least one lane")

    all_shap = np.concatenate([lane.shap_values for lane in data.lanes])
    lo, hi = float(all_shap.min()), float(all_shap.max())
    span = (hi - lo) or 1.0
    lo, hi = lo - 0.05 * span, hi + 0.05 * span

    left = style.beeswarm_label_width
    xs = _Scale(lo, hi, left, style.width - style.margin_right)
    plot_top = style.margin_top
    plot_bottom = style.height - style.margin_bottom
    lane_h = (plot_bottom - plot_top) / len(data.lanes)

    parts = _svg_open(style, "#ffffff")
    if title:
        parts.append(
            f'<text class="title" x="{style.width // 2}" y="26" font-size="16" '
            f'text-anchor="middle" fill="#111">{escape(title)}</text>'
        )
    zero_x = xs(0.0)
    parts.append(
        f'<line class="zero-line" x1="{_fmt(zero_x)}" y1="{_fmt(plot_top)}" '
        f'x2="{_fmt(zero_x)}" y2="{_fmt(plot_bottom)}" stroke="#888" '
        f'stroke-width="1" stroke-dasharray="3,3"/>'
    )

    for lane_index, lane in enumerate(data.lanes):
        center = plot_top + (lane_index + 0.5) * lane_h
        parts.append(
            f'<text class="lane-label" x="{left - 8}" y="{_fmt(center + 3.5)}" '
            f'font-size="11" text-anchor="end" fill="#222">'
            f'{escape(lane.name)}</text>'
        )
        rng = np.random.default_rng([style.jitter_seed, lane_index])
        offsets = rng.uniform(-style.jitter_fraction, style.jitter_fraction,
                              len(lane.shap_values)) * lane_h
        for value, color_value, offset in zip(lane.shap_values,
                                              lane.color_values, offsets):
            color = _lerp_color(style.low_color, style.high_color,
                                float(color_value))
            parts.append(
                f'<circle class="pt" cx="{_fmt(xs(float(value)))}" '
                f'cy="{_fmt(center + offset)}" r="{style.point_radius}" '
                f'fill="{color}" fill-opacity="0.85"/>'
            )

    parts.append(
        f'<text x="{_fmt((left + style.width - style.margin_right) / 2)}" '
        f'y="{_fmt(plot_bottom + 30)}" font-size="13" text-anchor="middle" '
        f'fill="#222">Attribution (impact on predicted yield)</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
