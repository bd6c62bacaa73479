"""Exact Shapley attribution for the regression forest.

Implements the path-dependent polynomial-time algorithm for tree ensembles
(Lundberg et al. 2020, "From local explanations to global understanding").
A feature absent from a coalition is marginalized by descending both
children of its split weighted by their training coverage; a present
feature follows the row's actual branch. The recursion keeps, per root-leaf
path, one entry per distinct split feature (repeat splits on one feature
merge multiplicatively) plus the permutation-weight polynomial that makes
each leaf's contribution to every coalition size available in one pass.

The result is the exact Shapley value of that conditional-expectation game:
summing attributions and the base value reproduces the forest prediction to
floating-point accuracy, and the brute-force subset enumeration over 2^M
coalitions agrees to 1e-8 (see the test suite).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatch, MissingWeights
from .forest import LEAF, Forest, RegressionTree

# one path entry per distinct feature on the current root-leaf path:
# [feature_index, zero_fraction, one_fraction, pweight]


def _extend(path: list[list[float]], zero_fraction: float,
            one_fraction: float, feature_index: int) -> None:
    depth = len(path)
    path.append([feature_index, zero_fraction, one_fraction,
                 1.0 if depth == 0 else 0.0])
    for i in range(depth - 1, -1, -1):
        path[i + 1][3] += one_fraction * path[i][3] * (i + 1) / (depth + 1)
        path[i][3] = zero_fraction * path[i][3] * (depth - i) / (depth + 1)


def _unwind(path: list[list[float]], path_index: int) -> None:
    depth = len(path) - 1
    zero_fraction = path[path_index][1]
    one_fraction = path[path_index][2]
    next_one = path[depth][3]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = path[i][3]
            path[i][3] = next_one * (depth + 1) / ((i + 1) * one_fraction)
            next_one = tmp - path[i][3] * zero_fraction * (depth - i) / (depth + 1)
        else:
            path[i][3] = path[i][3] * (depth + 1) / (zero_fraction * (depth - i))
    for i in range(path_index, depth):
        # shift the entry fields down but keep the recomputed pweights in place
        path[i][0] = path[i + 1][0]
        path[i][1] = path[i + 1][1]
        path[i][2] = path[i + 1][2]
    path.pop()


def _unwound_sum(path: list[list[float]], path_index: int) -> float:
    depth = len(path) - 1
    zero_fraction = path[path_index][1]
    one_fraction = path[path_index][2]
    next_one = path[depth][3]
    total = 0.0
    if one_fraction != 0.0:
        for i in range(depth - 1, -1, -1):
            tmp = next_one / ((i + 1) * one_fraction)
            total += tmp
            next_one = path[i][3] - tmp * zero_fraction * (depth - i)
    else:
        for i in range(depth - 1, -1, -1):
            total += path[i][3] / (zero_fraction * (depth - i))
    return total * (depth + 1)


def _recurse(tree: RegressionTree, x: np.ndarray, phi: np.ndarray, node: int,
             parent_path: list[list[float]], parent_zero: float,
             parent_one: float, parent_feature: int) -> None:
    path = [entry[:] for entry in parent_path]
    _extend(path, parent_zero, parent_one, parent_feature)

    if tree.left[node] == LEAF:
        leaf_value = float(tree.value[node])
        for i in range(1, len(path)):
            w = _unwound_sum(path, i)
            feature, zero_fraction, one_fraction, _ = path[i]
            phi[int(feature)] += w * (one_fraction - zero_fraction) * leaf_value
        return

    feature = int(tree.split_feature[node])
    left, right = int(tree.left[node]), int(tree.right[node])
    hot, cold = (left, right) if x[feature] <= tree.threshold[node] else (right, left)
    weight = float(tree.weight[node])
    hot_zero = float(tree.weight[hot]) / weight
    cold_zero = float(tree.weight[cold]) / weight

    incoming_zero = 1.0
    incoming_one = 1.0
    for i, entry in enumerate(path):
        if entry[0] == feature:
            incoming_zero, incoming_one = entry[1], entry[2]
            _unwind(path, i)
            break

    _recurse(tree, x, phi, hot, path, hot_zero * incoming_zero, incoming_one, feature)
    _recurse(tree, x, phi, cold, path, cold_zero * incoming_zero, 0.0, feature)


def tree_shap(forest: Forest, x) -> tuple[np.ndarray, float]:
    """Shapley attribution of one row: (phi vector, base value).

    phi averages the per-tree attributions; the base value averages the
    per-tree root expectations, so base + sum(phi) equals predict(forest, x).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (forest.n_features,):
        raise DimensionMismatch(
            f"expected {forest.n_features} features, got shape {x.shape}"
        )
    phi = np.zeros(forest.n_features)
    base = 0.0
    for tree in forest.trees:
        if not (tree.weight > 0).all():
            raise MissingWeights("tree has a node with non-positive training weight")
        _recurse(tree, x, phi, 0, [], 1.0, 1.0, -1)
        base += float(tree.value[0])
    n = len(forest.trees)
    return phi / n, base / n


@dataclass(frozen=True)
class ShapMatrix:
    """Per-row, per-feature attributions for a whole dataset."""

    feature_names: tuple[str, ...]
    row_ids: tuple[str, ...]
    values: np.ndarray          # (n_rows, n_features) attributions
    feature_values: np.ndarray  # raw inputs, same shape, for coloring
    base_value: float

    def __post_init__(self):
        n, f = len(self.row_ids), len(self.feature_names)
        if self.values.shape != (n, f) or self.feature_values.shape != (n, f):
            raise DimensionMismatch("attribution matrix shape mismatch")
        self.values.setflags(write=False)
        self.feature_values.setflags(write=False)


def explain_dataset(forest: Forest, data: Dataset) -> ShapMatrix:
    if forest.feature_names != data.schema.names:
        raise DimensionMismatch(
            "forest was fit on a different variable catalog than this dataset"
        )
    values = np.empty((len(data), forest.n_features))
    base = 0.0
    for i in range(len(data)):
        values[i], base = tree_shap(forest, data.features[i])
    return ShapMatrix(
        forest.feature_names,
        data.row_ids,
        values,
        data.features.copy(),
        base,
    )


@dataclass(frozen=True)
class RankedFeature:
    index: int
    name: str
    mean_abs_shap: float


@dataclass(frozen=True)
class FeatureRanking:
    entries: tuple[RankedFeature, ...]


def rank_features(matrix: ShapMatrix, top_k: int = 20) -> FeatureRanking:
    """Features ordered by mean |attribution| descending; exact ties fall
    back to catalog order. Truncated to top_k."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    scores = np.abs(matrix.values).mean(axis=0)
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
    return FeatureRanking(tuple(
        RankedFeature(j, matrix.feature_names[j], float(scores[j]))
        for j in order[:top_k]
    ))


@dataclass(frozen=True)
class BeeswarmLane:
    name: str
    shap_values: np.ndarray
    color_values: np.ndarray  # feature values min-max normalized to [0, 1]


@dataclass(frozen=True)
class BeeswarmData:
    lanes: tuple[BeeswarmLane, ...]


def beeswarm_export(matrix: ShapMatrix, ranking: FeatureRanking) -> BeeswarmData:
    """One lane per ranked feature, highest mean |attribution| first.

    Color values are min-max normalized per feature; a constant feature
    maps to 0.5 rather than dividing by zero.
    """
    lanes = []
    for entry in ranking.entries:
        raw = matrix.feature_values[:, entry.index]
        lo, hi = float(raw.min()), float(raw.max())
        if hi > lo:
            color = (raw - lo) / (hi - lo)
        else:
            color = np.full_like(raw, 0.5)
        lanes.append(BeeswarmLane(
            entry.name,
            matrix.values[:, entry.index].copy(),
            color,
        ))
    return BeeswarmData(tuple(lanes))


BASE_VALUE_PREFIX = "# base_value,"


def shap_matrix_to_csv(matrix: ShapMatrix) -> str:
    """CSV with one attribution row per input row, preceded by a comment
    sidecar line carrying the base value."""
    out = io.StringIO()
    out.write(f"{BASE_VALUE_PREFIX}{matrix.base_value!r}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["row_id", *matrix.feature_names])
    for i, row_id in enumerate(matrix.row_ids):
        writer.writerow([row_id, *(repr(v) for v in matrix.values[i].tolist())])
    return out.getvalue()


def shap_matrix_from_csv(text: str, feature_values: np.ndarray | None = None) -> ShapMatrix:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(BASE_VALUE_PREFIX):
        raise ValueError("missing base_value sidecar line")
    base = float(lines[0][len(BASE_VALUE_PREFIX):])
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    header = rows[0]
    names = tuple(header[1:])
    row_ids = tuple(r[0] for r in rows[1:])
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64)
    if feature_values is None:
        feature_values = np.zeros_like(values)
    return ShapMatrix(names, row_ids, values, feature_values, base)
