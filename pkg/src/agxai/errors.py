"""Exception types raised across the pipeline.

Every error carries enough location detail (row, column, label, round) to act
on without re-running the failing step.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


# --- dataset ---------------------------------------------------------------

class DatasetError(PipelineError):
    pass


class EmptyFile(DatasetError):
    pass


class MissingColumn(DatasetError):
    def __init__(self, name: str):
        super().__init__(f"required column missing from header: {name!r}")
        self.name = name


class NonNumericCell(DatasetError):
    def __init__(self, row: str, column: str, value: str):
        super().__init__(
            f"cell ({row!r}, {column!r}) is not a finite number: {value!r}"
        )
        self.row = row
        self.column = column
        self.value = value


class MissingValue(DatasetError):
    def __init__(self, row: str, column: str):
        super().__init__(f"cell ({row!r}, {column!r}) is empty")
        self.row = row
        self.column = column


# --- model fitting ---------------------------------------------------------

class ModelError(PipelineError):
    pass


class InsufficientData(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class DegenerateTarget(ModelError):
    """Target vector has zero variance where variance is required."""


class MissingWeights(ModelError):
    """A tree node lacks the training weight needed for attribution."""


# --- agent session ---------------------------------------------------------

class SessionError(PipelineError):
    pass


class ClientError(SessionError):
    """Transport-level failure talking to the language-model endpoint."""


class EmptyResponse(SessionError):
    pass


class NoCodeBlock(SessionError):
    """Model reply contained no fenced code block after one retry."""


class ExecutorTimeout(SessionError):
    pass


class ExecutorCrash(SessionError):
    def __init__(self, exit_status: int, detail: str = ""):
        msg = f"executor exited with status {exit_status}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.exit_status = exit_status


# --- evaluation ------------------------------------------------------------

class EvaluationError(PipelineError):
    pass


class ScoreOutOfRange(EvaluationError):
    def __init__(self, label: str, metric: str, score: object):
        super().__init__(
            f"score for ({label!r}, {metric}) must be an integer in 1..7, got {score!r}"
        )
        self.label = label
        self.metric = metric
        self.score = score


class UnknownLabel(EvaluationError):
    def __init__(self, label: str):
        super().__init__(f"label not present on this sheet: {label!r}")
        self.label = label


class IncompleteSheet(EvaluationError):
    def __init__(self, missing: list):
        super().__init__(f"sheet incomplete, missing cells: {missing}")
        self.missing = missing


class EmptyGroup(EvaluationError):
    pass


# --- trajectory statistics -------------------------------------------------

class StatsError(PipelineError):
    pass


class DegenerateWithinVariance(StatsError):
    """All groups are internally constant; the F statistic is undefined."""


class SingularSystem(StatsError):
    pass


class RssUnderflow(StatsError):
    """Residual sum of squares is below the noise floor; log-likelihood AIC
    would be dominated by rounding error."""
