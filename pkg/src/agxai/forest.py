"""Random-forest regression built from first principles.

Trees are grown CART-style on bootstrap resamples: at each node the split
minimizing the summed squared error of the two children is chosen, with
candidate thresholds at midpoints between adjacent sorted unique values.
Ties break toward the lowest feature index, then the lowest threshold, so a
fit is a pure function of (data, config). No feature subsampling is applied
at split time; randomness enters only through the per-tree bootstrap, whose
generator is derived from (config.seed, tree_index).

Rows with x[feature] <= threshold are routed left. Every node keeps the
count of bootstrap rows routed through it (its training weight) and the mean
target of those rows, which downstream attribution uses as the node's
conditional expectation.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import (
    DegenerateTarget,
    DimensionMismatch,
    InsufficientData,
)

LEAF = -1

DEFAULT_SEED = 42


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int
    max_depth: int | None
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None for unlimited")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")  # feeds a SeedSequence


def default_grid(seed: int = DEFAULT_SEED) -> tuple[ForestConfig, ...]:
    """The six-point search grid: {100, 200} trees x {unlimited, 10, 20} depth."""
    return tuple(
        ForestConfig(n, d, seed)
        for d in (None, 10, 20)
        for n in (100, 200)
    )


@dataclass(frozen=True)
class RegressionTree:
    """Flat preorder arrays; index 0 is the root, LEAF (-1) marks no child.

    value[i] is the mean training target routed through node i, so leaves
    carry their prediction and internal nodes carry the weight-averaged
    expectation of their subtree. weight[i] counts routed bootstrap rows;
    children's weights always sum to their parent's.
    """

    split_feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        for arr in (self.split_feature, self.threshold, self.left,
                    self.right, self.value, self.weight):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.value)

    def is_leaf(self, i: int) -> bool:
        return self.left[i] == LEAF

    def predict_row(self, x: np.ndarray) -> float:
        i = 0
        while self.left[i] != LEAF:
            if x[self.split_feature[i]] <= self.threshold[i]:
                i = self.left[i]
            else:
                i = self.right[i]
        return float(self.value[i])


@dataclass(frozen=True)
class Forest:
    config: ForestConfig
    trees: tuple[RegressionTree, ...]
    feature_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _best_split(X: np.ndarray, y: np.ndarray):
    """Return (feature, threshold) minimizing summed child SSE, or None.

    Vectorized over all features at once via per-column prefix sums of the
    sorted targets. Only boundaries between distinct adjacent values are
    candidates, which also guarantees both children are non-empty.
    """
    m, n_feat = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    cy = np.cumsum(ys, axis=0)
    cy2 = np.cumsum(ys * ys, axis=0)
    total = cy[-1]
    total2 = cy2[-1]
    n_left = np.arange(1, m, dtype=np.float64)[:, None]
    n_right = m - n_left
    sum_left = cy[:-1]
    sum2_left = cy2[:-1]
    cost = (sum2_left - sum_left * sum_left / n_left) \
        + (total2 - sum2_left) - (total - sum_left) ** 2 / n_right
    cost[xs[1:] <= xs[:-1]] = np.inf

    pos = np.argmin(cost, axis=0)
    col_cost = cost[pos, np.arange(n_feat)]
    j = int(np.argmin(col_cost))
    if not np.isfinite(col_cost[j]):
        return None
    i = int(pos[j])
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = (lo + hi) / 2.0
    # midpoint can round up to hi when lo and hi are adjacent floats; keep
    # the threshold strictly below hi so the scored partition is preserved
    if thr >= hi:
        thr = lo
    return j, float(thr)


def _grow_tree(X: np.ndarray, y: np.ndarray, max_depth: int | None) -> RegressionTree:
    split_feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    weight: list[int] = []

    def build(idx: np.ndarray, depth: int) -> int:
        node = len(value)
        split_feature.append(LEAF)
        threshold.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        ys = y[idx]
        value.append(float(ys.mean()))
        weight.append(int(idx.size))

        depth_ok = max_depth is None or depth < max_depth
        if idx.size >= 2 and depth_ok and np.ptp(ys) > 0:
            found = _best_split(X[idx], ys)
            if found is not None:
                j, thr = found
                split_feature[node] = j
                threshold[node] = thr
                mask = X[idx, j] <= thr
                left[node] = build(idx[mask], depth + 1)
                right[node] = build(idx[~mask], depth + 1)
        return node

    build(np.arange(len(y)), 0)
    return RegressionTree(
        np.asarray(split_feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
        np.asarray(weight, dtype=np.int64),
    )


def fit_forest(data: Dataset, config: ForestConfig, *,
               bootstrap: bool = True) -> Forest:
    """Fit n_estimators trees on bootstrap resamples of the dataset.

    Tree t draws its resample from a generator seeded by (config.seed, t),
    so refits are bit-identical regardless of how the work is scheduled.
    bootstrap=False trains every tree on the full sample (all trees then
    coincide); it exists for attribution tests that need a known tree.
    """
    n = len(data)
    if n < 2:
        raise InsufficientData(f"need at least 2 rows to fit, got {n}")
    X = data.features
    y = data.targets
    trees = []
    for t in range(config.n_estimators):
        if bootstrap:
            rng = np.random.default_rng([config.seed, t])
            idx = rng.integers(0, n, size=n)
            trees.append(_grow_tree(X[idx], y[idx], config.max_depth))
        else:
            trees.append(_grow_tree(X, y, config.max_depth))
    return Forest(config, tuple(trees), data.schema.names)


def predict(forest: Forest, x: np.ndarray) -> float:
    """Forest prediction for one row: unweighted mean of the tree outputs."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (forest.n_features,):
        raise DimensionMismatch(
            f"expected {forest.n_features} features, got shape {x.shape}"
        )
    return float(np.mean([t.predict_row(x) for t in forest.trees]))


def predict_rows(forest: Forest, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.array([predict(forest, row) for row in X])


def r_squared(predicted, actual) -> float:
    """Coefficient of determination, 1 - SSres/SStot (can be negative)."""
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape or p.ndim != 1:
        raise DimensionMismatch(
            f"predicted {p.shape} and actual {a.shape} must be equal-length vectors"
        )
    if len(a) < 2:
        raise InsufficientData("r_squared needs at least 2 observations")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateTarget("actual values are constant")
    ss_res = float(np.sum((a - p) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class LooResult:
    config: ForestConfig
    predictions: np.ndarray
    actuals: np.ndarray
    r2: float


def loo_cv(data: Dataset, config: ForestConfig, *,
           bootstrap: bool = True) -> LooResult:
    """Leave-one-out cross-validation: one refit per held-out row.

    Every fold reuses the same config (and therefore the same bootstrap
    seed derivation); the held-out row only changes the training table.
    """
    n = len(data)
    if n < 3:
        raise InsufficientData(f"leave-one-out needs at least 3 rows, got {n}")
    preds = np.empty(n)
    for i in range(n):
        fold = fit_forest(data.drop_row(i), config, bootstrap=bootstrap)
        preds[i] = predict(fold, data.features[i])
    return LooResult(config, preds, data.targets.copy(),
                     r_squared(preds, data.targets))


@dataclass(frozen=True)
class CvReport:
    entries: tuple[tuple[ForestConfig, float], ...]
    best_config: ForestConfig
    best_r2: float


def grid_search(data: Dataset, grid: tuple[ForestConfig, ...] | None = None, *,
                bootstrap: bool = True) -> CvReport:
    """LOO-CV R^2 for each grid point; the best entry wins, earlier order
    breaking exact ties."""
    if grid is None:
        grid = default_grid()
    if not grid:
        raise ValueError("grid must contain at least one config")
    entries = []
    for config in grid:
        entries.append((config, loo_cv(data, config, bootstrap=bootstrap).r2))
    best_config, best_r2 = max(entries, key=lambda e: e[1])
    return CvReport(tuple(entries), best_config, best_r2)


def _depth_token(depth: int | None) -> str:
    return "none" if depth is None else str(depth)


def cv_report_to_csv(report: CvReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["n_estimators", "max_depth", "seed", "loo_r2", "selected"])
    for config, r2 in report.entries:
        writer.writerow([
            config.n_estimators,
            _depth_token(config.max_depth),
            config.seed,
            repr(r2),
            int(config == report.best_config),
        ])
    return out.getvalue()


FOREST_FORMAT = "agxai.forest"
FOREST_VERSION = 1


def forest_to_json(forest: Forest) -> str:
    """Self-describing JSON; round-trips bit-identically through
    forest_from_json. Leaf thresholds serialize as null."""
    doc = {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "config": {
            "n_estimators": forest.config.n_estimators,
            "max_depth": forest.config.max_depth,
            "seed": forest.config.seed,
        },
        "feature_names": list(forest.feature_names),
        "trees": [
            {
                "split_feature": t.split_feature.tolist(),
                "threshold": [
                    None if t.left[i] == LEAF else float(t.threshold[i])
                    for i in range(t.n_nodes)
                ],
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
                "weight": t.weight.tolist(),
            }
            for t in forest.trees
        ],
    }
    return json.dumps(doc, indent=1)


def forest_from_json(text: str) -> Forest:
    doc = json.loads(text)
    if doc.get("format") != FOREST_FORMAT:
        raise ValueError(f"not a forest document: format={doc.get('format')!r}")
    if doc.get("version") != FOREST_VERSION:
        raise ValueError(f"unsupported forest version: {doc.get('version')!r}")
    config = ForestConfig(
        doc["config"]["n_estimators"],
        doc["config"]["max_depth"],
        doc["config"]["seed"],
    )
    trees = []
    for t in doc["trees"]:
        thresholds = np.array(
            [np.nan if v is None else v for v in t["threshold"]], dtype=np.float64
        )
        trees.append(RegressionTree(
            np.asarray(t["split_feature"], dtype=np.int64),
            thresholds,
            np.asarray(t["left"], dtype=np.int64),
            np.asarray(t["right"], dtype=np.int64),
            np.asarray(t["value"], dtype=np.float64),
            np.asarray(t["weight"], dtype=np.int64),
        ))
    return Forest(config, tuple(trees), tuple(doc["feature_names"]))
