"""Blind multi-evaluator scoring of per-round recommendations.

Every evaluator receives the same set of recommendation texts, one per
refinement round, but shuffled into a private presentation order and
relabeled Item A, Item B, ... so nothing about the round survives in what
they see. The shuffle is a Fisher-Yates pass over a generator seeded by the
study seed and a digest of the evaluator id: reproducible per evaluator,
different across evaluators. De-blinding happens only when raw scores are
recorded against the sheet object that produced the labels.

Scores are integer Likert 1..7 on seven fixed metrics. Aggregation yields
per-group, per-round, per-metric means with the standard error of the mean,
plus an overall trajectory built by averaging each evaluator's seven metric
scores before averaging across evaluators.

When the judging panel is a set of language models rather than people, run
each judge in a fresh context per sheet (no shared conversation state) so
its scores cannot condition on other items' ratings; the blinding here only
removes round identity, not inter-item influence.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    EmptyGroup,
    IncompleteSheet,
    ScoreOutOfRange,
    UnknownLabel,
)
from .trajectory_stats import RoundSeries

SCORE_MIN = 1
SCORE_MAX = 7

AVERAGE = "Average"  # pseudo-metric token for the overall trajectory


class Metric(Enum):
    CLARITY = "Clarity"
    CONCISENESS = "Conciseness"
    CONTEXTUAL_RELEVANCE = "ContextualRelevance"
    COST_CONSIDERATION = "CostConsideration"
    CROP_SCIENCE_CREDIBILITY = "CropScienceCredibility"
    PRACTICALITY = "Practicality"
    SPECIFICITY = "Specificity"


METRICS = tuple(Metric)


class Group(Enum):
    HUMAN = "Human"
    LLM = "LLM"


@dataclass(frozen=True)
class EvaluatorProfile:
    evaluator_id: str
    group: Group
    label: str = ""  # free-text note (model name, expertise), not serialized

    def __post_init__(self):
        if not self.evaluator_id.strip():
            raise ValueError("evaluator_id must be non-empty")


def _coerce_metric(metric) -> Metric:
    if isinstance(metric, Metric):
        return metric
    try:
        return Metric(metric)
    except ValueError:
        valid = ", ".join(m.value for m in METRICS)
        raise ValueError(f"unknown metric {metric!r}; expected one of: {valid}") from None


def _check_score(label: str, metric: Metric, score) -> int:
    if isinstance(score, bool) or not isinstance(score, (int, np.integer)):
        raise ScoreOutOfRange(label, metric.value, score)
    score = int(score)
    if not SCORE_MIN <= score <= SCORE_MAX:
        raise ScoreOutOfRange(label, metric.value, score)
    return score


def _spreadsheet_letters(i: int) -> str:
    out = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        out = chr(ord("A") + r) + out
    return out


@dataclass(frozen=True)
class EvaluationSheet:
    """One evaluator's blinded item order.

    labels[p] names the item shown at position p; _presented_rounds[p] is
    the round it really is. Only the labels are serialized; the mapping
    stays in memory for packet assembly and de-blinding.
    """

    evaluator_id: str
    labels: tuple[str, ...]
    _presented_rounds: tuple[int, ...]

    def presented_round(self, position: int) -> int:
        """Round index behind presentation slot `position` (packet assembly
        only; never show this next to the items)."""
        return self._presented_rounds[position]

    def round_for_label(self, label: str) -> int:
        try:
            return self._presented_rounds[self.labels.index(label)]
        except ValueError:
            raise UnknownLabel(label) from None

    def to_json(self) -> str:
        return json.dumps(
            {"evaluator_id": self.evaluator_id, "items": list(self.labels)},
            indent=1,
        )


def make_evaluation_sheet(n_rounds: int, evaluator: EvaluatorProfile,
                          seed: int) -> EvaluationSheet:
    """Blind sheet for one evaluator: Fisher-Yates shuffled round order."""
    if n_rounds < 1:
        raise ValueError("need at least one round to evaluate")
    digest = int.from_bytes(
        hashlib.sha256(evaluator.evaluator_id.encode("utf-8")).digest()[:8], "big"
    )
    rng = np.random.default_rng([seed, digest])
    order = list(range(n_rounds))
    for i in range(n_rounds - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    labels = tuple(f"Item {_spreadsheet_letters(p)}" for p in range(n_rounds))
    return EvaluationSheet(evaluator.evaluator_id, labels, tuple(order))


def record_scores(sheet: EvaluationSheet, raw) -> dict[tuple[int, Metric], int]:
    """De-blind one returned sheet into {(round, metric): score}.

    raw is an iterable of (label, metric, score). Every (item, metric) cell
    must be present exactly once: a finished sheet is the unit of ingestion,
    so partial or duplicated sheets are rejected here.
    """
    fragment: dict[tuple[int, Metric], int] = {}
    seen: set[tuple[str, Metric]] = set()
    for label, metric, score in raw:
        metric = _coerce_metric(metric)
        round_index = sheet.round_for_label(label)
        if (label, metric) in seen:
            raise ValueError(f"duplicate score for ({label!r}, {metric.value})")
        seen.add((label, metric))
        fragment[(round_index, metric)] = _check_score(label, metric, score)
    missing = [
        (label, metric.value)
        for label in sheet.labels
        for metric in METRICS
        if (label, metric) not in seen
    ]
    if missing:
        raise IncompleteSheet(missing)
    return fragment


class ScoreMatrix:
    """Accumulated scores across evaluators: (evaluator, round, metric) -> int."""

    def __init__(self):
        self._groups: dict[str, Group] = {}
        self._scores: dict[tuple[str, int, Metric], int] = {}

    def ingest(self, evaluator: EvaluatorProfile,
               fragment: dict[tuple[int, Metric], int]) -> None:
        known = self._groups.get(evaluator.evaluator_id)
        if known is not None and known is not evaluator.group:
            raise ValueError(
                f"evaluator {evaluator.evaluator_id!r} already registered "
                f"in group {known.value}"
            )
        self._groups[evaluator.evaluator_id] = evaluator.group
        for (round_index, metric), score in fragment.items():
            self.add(evaluator, round_index, metric, score)

    def add(self, evaluator: EvaluatorProfile, round_index: int,
            metric, score) -> None:
        metric = _coerce_metric(metric)
        score = _check_score(f"round {round_index}", metric, score)
        if round_index < 0:
            raise ValueError("round index must be >= 0")
        self._groups.setdefault(evaluator.evaluator_id, evaluator.group)
        self._scores[(evaluator.evaluator_id, round_index, metric)] = score

    @property
    def evaluator_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._groups))

    def group_of(self, evaluator_id: str) -> Group:
        return self._groups[evaluator_id]

    @property
    def rounds(self) -> tuple[int, ...]:
        return tuple(sorted({r for (_, r, _) in self._scores}))

    def score(self, evaluator_id: str, round_index: int, metric: Metric) -> int:
        return self._scores[(evaluator_id, round_index, metric)]

    def has(self, evaluator_id: str, round_index: int, metric: Metric) -> bool:
        return (evaluator_id, round_index, metric) in self._scores

    def __len__(self) -> int:
        return len(self._scores)


def _mean_sem(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if len(values) < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(len(values)))


@dataclass(frozen=True)
class CellStat:
    mean: float
    sem: float
    n: int


@dataclass(frozen=True)
class RoundSummary:
    rounds: tuple[int, ...]
    groups: tuple[Group, ...]
    cells: dict  # (Group, round, Metric) -> CellStat
    overall: dict  # (Group, round) -> CellStat


def aggregate(matrix: ScoreMatrix) -> RoundSummary:
    """Per-group trajectory statistics from a complete score matrix.

    Completeness is checked first: every registered evaluator must have
    scored every metric at every round seen anywhere in the matrix. The
    overall cell is the mean of per-evaluator seven-metric means, which for
    a complete sheet equals the mean of the seven per-metric means.
    """
    if not matrix.evaluator_ids:
        raise EmptyGroup("score matrix has no evaluators")
    rounds = matrix.rounds
    if not rounds:
        raise EmptyGroup("score matrix has no scores")
    missing = [
        (evaluator_id, r, metric.value)
        for evaluator_id in matrix.evaluator_ids
        for r in rounds
        for metric in METRICS
        if not matrix.has(evaluator_id, r, metric)
    ]
    if missing:
        raise IncompleteSheet(missing)

    groups = tuple(
        g for g in Group
        if any(matrix.group_of(e) is g for e in matrix.evaluator_ids)
    )
    cells = {}
    overall = {}
    for group in groups:
        members = [e for e in matrix.evaluator_ids if matrix.group_of(e) is group]
        for r in rounds:
            for metric in METRICS:
                scores = np.array([matrix.score(e, r, metric) for e in members],
                                  dtype=np.float64)
                mean, sem = _mean_sem(scores)
                cells[(group, r, metric)] = CellStat(mean, sem, len(members))
            per_evaluator = np.array([
                np.mean([matrix.score(e, r, metric) for metric in METRICS])
                for e in members
            ])
            mean, sem = _mean_sem(per_evaluator)
            overall[(group, r)] = CellStat(mean, sem, len(members))
    return RoundSummary(rounds, groups, cells, overall)


def summary_cell(summary: RoundSummary, group: Group, round_index: int,
                 metric) -> CellStat:
    if metric == AVERAGE:
        return summary.overall[(group, round_index)]
    return summary.cells[(group, round_index, _coerce_metric(metric))]


def metric_series(summary: RoundSummary, group: Group, metric) -> RoundSeries:
    """Mean-score trajectory for one (group, metric); metric may be AVERAGE."""
    means = [summary_cell(summary, group, r, metric).mean for r in summary.rounds]
    return RoundSeries(np.array(summary.rounds, dtype=np.float64),
                       np.array(means, dtype=np.float64))


def metric_sems(summary: RoundSummary, group: Group, metric) -> np.ndarray:
    return np.array([
        summary_cell(summary, group, r, metric).sem for r in summary.rounds
    ])


def raw_round_groups(matrix: ScoreMatrix, group: Group, metric) -> list[list[float]]:
    """Raw per-round score samples for ANOVA; AVERAGE uses per-evaluator
    seven-metric means."""
    members = [e for e in matrix.evaluator_ids if matrix.group_of(e) is group]
    if not members:
        raise EmptyGroup(f"no evaluators in group {group.value}")
    out = []
    for r in matrix.rounds:
        if metric == AVERAGE:
            out.append([
                float(np.mean([matrix.score(e, r, m) for m in METRICS]))
                for e in members
            ])
        else:
            m = _coerce_metric(metric)
            out.append([float(matrix.score(e, r, m)) for e in members])
    return out


@dataclass(frozen=True)
class TrajectorySummary:
    group: Group
    metric: str  # metric token or AVERAGE
    round0: float
    peak_rounds: tuple[int, ...]
    peak: float
    last_round: int
    last: float
    delta_peak_vs_round0: float
    delta_last_vs_peak: float


def summarize_trajectory(summary: RoundSummary, group: Group,
                         metric) -> TrajectorySummary:
    """Round-0 / peak / final-round digest of one trajectory.

    The peak is the maximum mean; every round attaining it exactly is
    reported. Deltas are peak minus round 0 and final round minus peak.
    """
    rounds = summary.rounds
    means = [summary_cell(summary, group, r, metric).mean for r in rounds]
    peak = max(means)
    peak_rounds = tuple(r for r, m in zip(rounds, means) if m == peak)
    token = metric if metric == AVERAGE else _coerce_metric(metric).value
    return TrajectorySummary(
        group=group,
        metric=token,
        round0=means[0],
        peak_rounds=peak_rounds,
        peak=peak,
        last_round=rounds[-1],
        last=means[-1],
        delta_peak_vs_round0=peak - means[0],
        delta_last_vs_peak=means[-1] - peak,
    )


# --- CSV wire formats ----------------------------------------------------------

SCORES_HEADER = ["evaluator_id", "group", "round", "metric", "score"]


def scores_to_csv(matrix: ScoreMatrix) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SCORES_HEADER)
    metric_order = {m: i for i, m in enumerate(METRICS)}
    keys = sorted(
        matrix._scores,
        key=lambda k: (k[0], k[1], metric_order[k[2]]),
    )
    for evaluator_id, round_index, metric in keys:
        writer.writerow([
            evaluator_id,
            matrix.group_of(evaluator_id).value,
            round_index,
            metric.value,
            matrix._scores[(evaluator_id, round_index, metric)],
        ])
    return out.getvalue()


def scores_from_csv(text: str) -> ScoreMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [h.strip() for h in rows[0]] != SCORES_HEADER:
        raise ValueError(f"scores CSV must start with header {','.join(SCORES_HEADER)}")
    matrix = ScoreMatrix()
    for lineno, record in enumerate(rows[1:], start=2):
        if not record or not any(c.strip() for c in record):
            continue
        if len(record) != 5:
            raise ValueError(f"scores CSV line {lineno}: expected 5 columns")
        evaluator_id, group_token, round_text, metric_token, score_text = (
            c.strip() for c in record
        )
        try:
            group = Group(group_token)
        except ValueError:
            valid = ", ".join(g.value for g in Group)
            raise ValueError(
                f"scores CSV line {lineno}: unknown group {group_token!r} "
                f"(expected {valid})"
            ) from None
        try:
            round_index = int(round_text)
            score = int(score_text)
        except ValueError:
            raise ScoreOutOfRange(f"line {lineno}", metric_token, score_text) from None
        matrix.add(EvaluatorProfile(evaluator_id, group), round_index,
                   metric_token, score)
    return matrix


def summary_to_csv(summary: RoundSummary) -> str:
    """Per-round cells keyed (group, round, metric); the overall trajectory
    appears under the Average pseudo-metric."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["group", "round", "metric", "mean", "sem", "n"])
    for group in summary.groups:
        for r in summary.rounds:
            stat = summary.overall[(group, r)]
            writer.writerow([group.value, r, AVERAGE,
                             repr(stat.mean), repr(stat.sem), stat.n])
            for metric in METRICS:
                stat = summary.cells[(group, r, metric)]
                writer.writerow([group.value, r, metric.value,
                                 repr(stat.mean), repr(stat.sem), stat.n])
    return out.getvalue()
