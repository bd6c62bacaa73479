"""SVG rendering: structure, verdict styling, and byte determinism."""

import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from agxai.render import PlotStyle, plot_beeswarm, plot_trajectory
from agxai.shap import ShapMatrix, beeswarm_export, rank_features
from agxai.trajectory_stats import (
    RoundSeries,
    Verdict,
    classify_trend,
)

X11 = np.arange(11.0)


def _series(y):
    return RoundSeries(X11[: len(y)], np.asarray(y, dtype=np.float64))


def _groups(y, spread=0.5):
    return [[v - spread, v, v + spread] for v in y]


def _classified(y):
    series = _series(y)
    return series, classify_trend(series, _groups(y))


@pytest.fixture(scope="module")
def inverted_u():
    rng = np.random.default_rng(3)
    y = 5.0 - 0.05 * (X11 - 4.0) ** 2 + rng.normal(0.0, 0.05, 11)
    series, classification = _classified(y)
    assert classification.verdict is Verdict.INVERTED_U
    return series, classification


@pytest.fixture(scope="module")
def increasing():
    rng = np.random.default_rng(11)
    y = 3.0 + 0.3 * X11 + rng.normal(0.0, 0.15, 11)
    series, classification = _classified(y)
    assert classification.verdict is Verdict.INCREASING
    return series, classification


SEMS = np.full(11, 0.12)


def _count(pattern, text):
    return len(re.findall(pattern, text))


# --- trajectory plots -----------------------------------------------------------

def test_trajectory_svg_is_well_formed_xml(inverted_u, increasing):
    for series, classification in (inverted_u, increasing):
        svg = plot_trajectory(series, SEMS, classification, title="t")
        root = ET.fromstring(svg)
        assert root.tag.endswith("svg")


def test_inverted_u_plot_structure(inverted_u):
    series, classification = inverted_u
    svg = plot_trajectory(series, SEMS, classification)
    assert _count(r'class="peak-star"', svg) == 1
    assert _count(r'stroke-dasharray="7,4"', svg) == 1
    assert _count(r'class="gam-curve"', svg) == 1
    assert _count(r'class="ci-band"', svg) == 1
    assert _count(r'class="errorbar"', svg) == 11
    assert _count(r'class="fit-line"', svg) == 0
    assert 'fill="#e9e9e9"' in svg.splitlines()[1]  # verdict shading


def test_errorbar_group_anatomy(inverted_u):
    series, classification = inverted_u
    svg = plot_trajectory(series, SEMS, classification)
    groups = re.findall(r'<g class="errorbar">(.*?)</g>', svg)
    assert len(groups) == 11
    for body in groups:
        assert body.count("<line") == 3
        assert body.count("<circle") == 1


def test_unique_peak_point_gets_darker_fill(inverted_u):
    series, classification = inverted_u
    svg = plot_trajectory(series, SEMS, classification)
    assert _count(r'fill="#091d2c"', svg) == 1
    assert _count(r'fill="#20435c"', svg) == 10


def test_increasing_plot_structure(increasing):
    series, classification = increasing
    svg = plot_trajectory(series, SEMS, classification)
    assert _count(r'class="fit-line"', svg) == 1
    assert _count(r'class="fit-label"', svg) == 1
    assert _count(r'class="peak-star"', svg) == 0
    assert _count(r'class="ci-band"', svg) == 0
    assert 'fill="#fcebd4"' in svg.splitlines()[1]
    label = re.search(r'class="fit-label"[^>]*>([^<]*)</text>', svg).group(1)
    assert label.startswith("y = ")
    assert "*" in label  # slope significant on this fixture


def test_no_trend_and_decreasing_shading():
    flat = 3.0 + np.random.default_rng(12).normal(0.0, 0.1, 11)
    series, classification = _classified(flat)
    assert classification.verdict is Verdict.NO_TREND
    svg = plot_trajectory(series, SEMS, classification)
    assert 'fill="#e4f2e4"' in svg.splitlines()[1]

    rng = np.random.default_rng(8)
    falling = 6.0 - 0.3 * X11 + rng.normal(0.0, 0.15, 11)
    series, classification = _classified(falling)
    assert classification.verdict is Verdict.DECREASING
    svg = plot_trajectory(series, SEMS, classification)
    assert 'fill="#dde9f7"' in svg.splitlines()[1]


def test_trajectory_determinism(inverted_u):
    series, classification = inverted_u
    a = plot_trajectory(series, SEMS, classification, title="same")
    b = plot_trajectory(series, SEMS, classification, title="same")
    assert a == b
    assert a.encode("utf-8") == b.encode("utf-8")


def test_trajectory_title_escaped(increasing):
    series, classification = increasing
    svg = plot_trajectory(series, SEMS, classification, title="a < b & c")
    assert "a &lt; b &amp; c" in svg
    ET.fromstring(svg)


def test_trajectory_rejects_misaligned_sems(increasing):
    series, classification = increasing
    with pytest.raises(ValueError, match="align"):
        plot_trajectory(series, np.zeros(5), classification)


def test_plot_style_requires_complete_shading():
    with pytest.raises(ValueError, match="every verdict"):
        PlotStyle(shading={Verdict.INVERTED_U: "#fff"})


# --- beeswarm plots ---------------------------------------------------------------

def _matrix(n_rows=66, n_features=25, seed=5):
    rng = np.random.default_rng(seed)
    names = tuple(f"feat{j:02d}" for j in range(n_features))
    rows = tuple(f"r{i:03d}" for i in range(n_rows))
    values = rng.normal(0.0, 1.0, (n_rows, n_features))
    values[:, 5] *= 10.0  # make one lane order deterministic at the top
    feature_values = rng.uniform(0.0, 9.0, (n_rows, n_features))
    return ShapMatrix(names, rows, values, feature_values, 0.0)


def test_beeswarm_lane_and_point_counts():
    matrix = _matrix()
    data = beeswarm_export(matrix, rank_features(matrix, top_k=20))
    svg = plot_beeswarm(data, title="attribution")
    ET.fromstring(svg)
    assert _count(r'class="lane-label"', svg) == 20
    assert _count(r'class="pt"', svg) == 20 * 66
    assert _count(r'class="zero-line"', svg) == 1


def test_beeswarm_top_lane_is_highest_ranked():
    matrix = _matrix()
    svg = plot_beeswarm(beeswarm_export(matrix, rank_features(matrix, top_k=4)))
    labels = re.findall(r'class="lane-label"[^>]*>([^<]*)</text>', svg)
    assert labels[0] == "feat05"
    centers = [float(m) for m in re.findall(
        r'class="lane-label"[^>]*y="([0-9.]+)"', svg)]
    assert centers == sorted(centers)  # top lane first, lanes descend the page


def test_beeswarm_single_zero_point_sits_on_zero_line():
    matrix = ShapMatrix(("only",), ("r0",), np.zeros((1, 1)), np.zeros((1, 1)), 2.0)
    svg = plot_beeswarm(beeswarm_export(matrix, rank_features(matrix, top_k=1)))
    zero_x = re.search(r'class="zero-line" x1="([0-9.]+)"', svg).group(1)
    point_x = re.search(r'class="pt" cx="([0-9.]+)"', svg).group(1)
    assert point_x == zero_x


def test_beeswarm_color_extremes_hit_style_colors():
    values = np.array([[1.0], [2.0]])
    feature_values = np.array([[0.0], [9.0]])
    matrix = ShapMatrix(("f",), ("a", "b"), values, feature_values, 0.0)
    style = PlotStyle()
    svg = plot_beeswarm(beeswarm_export(matrix, rank_features(matrix, top_k=1)),
                        style=style)
    fills = re.findall(r'class="pt"[^>]*fill="(#[0-9a-f]{6})"', svg)
    assert fills == [style.low_color, style.high_color]


def test_beeswarm_constant_feature_uses_midpoint_color():
    values = np.array([[1.0], [2.0], [3.0]])
    feature_values = np.full((3, 1), 4.2)
    matrix = ShapMatrix(("f",), ("a", "b", "c"), values, feature_values, 0.0)
    svg = plot_beeswarm(beeswarm_export(matrix, rank_features(matrix, top_k=1)))
    fills = set(re.findall(r'class="pt"[^>]*fill="(#[0-9a-f]{6})"', svg))
    assert len(fills) == 1
    assert fills.pop() not in {PlotStyle().low_color, PlotStyle().high_color}


def test_beeswarm_determinism():
    matrix = _matrix(seed=9)
    data = beeswarm_export(matrix, rank_features(matrix, top_k=10))
    assert plot_beeswarm(data) == plot_beeswarm(data)


def test_beeswarm_jitter_depends_on_style_seed():
    matrix = _matrix(seed=9)
    data = beeswarm_export(matrix, rank_features(matrix, top_k=3))
    a = plot_beeswarm(data, style=PlotStyle(jitter_seed=7))
    b = plot_beeswarm(data, style=PlotStyle(jitter_seed=8))
    assert a != b


def test_beeswarm_rejects_empty():
    from agxai.shap import BeeswarmData
    with pytest.raises(ValueError):
        plot_beeswarm(BeeswarmData(()))


def test_coordinates_are_fixed_precision(inverted_u):
    series, classification = inverted_u
    svg = plot_trajectory(series, SEMS, classification)
    for value in re.findall(r'c[xy]="([0-9.]+)"', svg):
        whole, _, frac = value.partition(".")
        assert len(frac) == 2
