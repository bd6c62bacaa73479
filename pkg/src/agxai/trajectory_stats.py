"""Trend analysis over refinement-round score trajectories.

Given mean scores indexed by round, the question is whether quality rises,
falls, rises-then-falls, or does nothing. Four pieces answer it:

* one-way ANOVA across the per-round score groups (overall effect),
* an OLS line (monotone baseline, slope significance via the t tail),
* a penalized cubic B-spline smooth (Eilers & Marx style P-spline) with the
  penalty weight chosen by generalized cross-validation,
* a derivative test on the smooth: an inverted U needs exactly one
  positive-to-negative sign change, positive mean slope before it and
  negative after, and a 95% derivative band that excludes zero on a
  contiguous stretch of at least ``rho`` of the grid on each side.

The spline verdict must also beat the line by more than 2 AIC units
(the conventional substantial-support threshold) before a peak is declared;
otherwise the verdict falls back to the line's slope test. F and t tail
probabilities go through the regularized incomplete beta function.

The basis uses uniformly extended knots, not clamped boundary knots, so the
null space of the second-order difference penalty is exactly the straight
lines: as lambda grows the smooth collapses onto the OLS fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import betainc, ndtri

from .errors import (
    DegenerateWithinVariance,
    InsufficientData,
    RssUnderflow,
    SingularSystem,
)

DEFAULT_ALPHA = 0.05
AIC_GATE = 2.0
DEFAULT_RHO = 0.25
RSS_FLOOR_PER_OBS = 1e-12
SIGN_EPS = 1e-9


@dataclass(frozen=True)
class RoundSeries:
    """Mean score per round: x holds the round indices, strictly increasing."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be equal-length vectors")
        if len(self.x) >= 2 and not (np.diff(self.x) > 0).all():
            raise ValueError("round indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.x)


# --- tail probabilities ------------------------------------------------------

def f_sf(f_stat: float, df1: float, df2: float) -> float:
    """Upper tail of the F distribution via the regularized incomplete beta."""
    if f_stat <= 0.0:
        return 1.0
    return float(betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f_stat)))


def t_sf_two_sided(t_stat: float, df: float) -> float:
    """Two-sided tail of Student's t via the regularized incomplete beta."""
    if t_stat == 0.0:
        return 1.0
    return float(betainc(df / 2.0, 0.5, df / (df + t_stat * t_stat)))


# --- one-way ANOVA -----------------------------------------------------------

@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float


def anova_one_way(groups) -> AnovaResult:
    """Classical one-way fixed-effects ANOVA over k groups of raw scores."""
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(arrays) < 2:
        raise InsufficientData("ANOVA needs at least 2 groups")
    for i, g in enumerate(arrays):
        if len(g) < 2:
            raise InsufficientData(f"group {i} has fewer than 2 values")
    all_values = np.concatenate(arrays)
    grand = all_values.mean()
    ss_between = sum(len(g) * (g.mean() - grand) ** 2 for g in arrays)
    ss_within = sum(float(np.sum((g - g.mean()) ** 2)) for g in arrays)
    df_between = len(arrays) - 1
    df_within = len(all_values) - len(arrays)
    if ss_within == 0.0:
        raise DegenerateWithinVariance(
            "every group is internally constant; F is undefined"
        )
    f_stat = (ss_between / df_between) / (ss_within / df_within)
    return AnovaResult(float(f_stat), df_between, df_within,
                       f_sf(f_stat, df_between, df_within))


# --- AIC ---------------------------------------------------------------------

def aic(n: int, rss: float, k: float) -> float:
    """Gaussian log-likelihood AIC: n(ln 2pi + 1 + ln(rss/n)) + 2k.

    Raises RssUnderflow when rss is at or below n * 1e-12; at that point the
    log term measures rounding noise, not fit quality.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    floor = RSS_FLOOR_PER_OBS * n
    if rss <= floor:
        raise RssUnderflow(f"rss={rss!r} at or below noise floor {floor!r}")
    return n * (math.log(2.0 * math.pi) + 1.0 + math.log(rss / n)) + 2.0 * k


def _aic_or_none(n: int, rss: float, k: float) -> float | None:
    try:
        return aic(n, rss, k)
    except RssUnderflow:
        return None


# --- OLS baseline --------------------------------------------------------------

@dataclass(frozen=True)
class LinearFit:
    alpha0: float
    alpha1: float
    r2: float
    rss: float
    aic: float | None
    slope_p: float
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))


def fit_linear(series: RoundSeries) -> LinearFit:
    """Least-squares line with a two-sided t test on the slope.

    Conventions at the degenerate edges: constant y gives slope 0 with
    p = 1; an exact noiseless line gives p = 0 (and aic None, since its
    rss underflows the AIC noise floor).
    """
    n = len(series)
    if n < 3:
        raise InsufficientData(f"need at least 3 points for a slope test, got {n}")
    x, y = series.x, series.y
    sxx = float(np.sum((x - x.mean()) ** 2))
    syy = float(np.sum((y - y.mean()) ** 2))
    if syy == 0.0:
        return LinearFit(float(y.mean()), 0.0, 0.0, 0.0,
                         _aic_or_none(n, 0.0, 2), 1.0, np.zeros(n))
    sxy = float(np.sum((x - x.mean()) * (y - y.mean())))
    alpha1 = sxy / sxx
    alpha0 = float(y.mean()) - alpha1 * float(x.mean())
    residuals = y - (alpha0 + alpha1 * x)
    rss = float(np.sum(residuals ** 2))
    r2 = 1.0 - rss / syy
    sigma2 = rss / (n - 2)
    if sigma2 == 0.0:
        slope_p = 0.0 if alpha1 != 0.0 else 1.0
    else:
        t_stat = alpha1 / math.sqrt(sigma2 / sxx)
        slope_p = t_sf_two_sided(t_stat, n - 2)
    return LinearFit(alpha0, alpha1, r2, rss, _aic_or_none(n, rss, 2), slope_p,
                     residuals)


# --- penalized spline smooth ---------------------------------------------------

Z_95 = float(ndtri(0.975))  # 1.959963984540054


def _default_lambda_grid() -> tuple[float, ...]:
    return tuple(float(10.0 ** e) for e in np.linspace(-3.0, 3.0, 11))


@dataclass(frozen=True)
class GamConfig:
    basis_size: int = 10
    penalty_order: int = 2
    lambda_grid: tuple[float, ...] = field(default_factory=_default_lambda_grid)
    ci_level: float = 0.95
    grid_points: int = 512

    def __post_init__(self):
        if self.basis_size < 4:
            raise ValueError("basis_size must be >= 4 for a cubic basis")
        if not 1 <= self.penalty_order < self.basis_size:
            raise ValueError("penalty_order must be >= 1 and below basis_size")
        if not self.lambda_grid or any(lam < 0 for lam in self.lambda_grid):
            raise ValueError("lambda_grid must be non-empty and non-negative")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must be in (0, 1)")
        if self.grid_points < 8:
            raise ValueError("grid_points must be >= 8")


def _uniform_knots(x_min: float, x_max: float, basis_size: int) -> np.ndarray:
    # equally spaced knots extended 3 spans past each end; the Greville
    # points are then uniform, so difference penalties act like derivative
    # penalties and their null space is exactly low-degree polynomials
    n_seg = basis_size - 3
    h = (x_max - x_min) / n_seg
    return x_min + (np.arange(basis_size + 4) - 3.0) * h


def _design(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    lo, hi = knots[3], knots[-4]
    clipped = np.clip(x, lo, hi)  # guards endpoint rounding, not extrapolation
    return BSpline.design_matrix(clipped, knots, 3).toarray()


@dataclass(frozen=True)
class GamFit:
    """Fitted penalized smooth with its evaluation grid and 95% band.

    aic is None when the residual sum of squares underflows the AIC noise
    floor (a near-interpolating fit); classification then cannot apply the
    AIC gate and falls back to the linear verdicts.
    """

    knots: np.ndarray
    coefficients: np.ndarray
    lam: float
    edf: float
    rss: float
    sigma2: float
    gcv: float
    aic: float | None
    grid_x: np.ndarray
    curve: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    covariance: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def evaluate(self, x) -> np.ndarray:
        return _design(np.atleast_1d(np.asarray(x, dtype=np.float64)),
                       self.knots) @ self.coefficients


def _solve_penalized(design: np.ndarray, y: np.ndarray,
                     d_mat: np.ndarray, lam: float):
    """Solve the penalized normal equations through the augmented QR.

    Stacking [design; sqrt(lam) D] keeps the solve accurate at extreme
    lambda, where forming design'design + lam D'D directly would drown the
    data block in rounding error.
    """
    n, p = design.shape
    augmented = np.vstack([design, math.sqrt(lam) * d_mat])
    q_mat, r_mat = np.linalg.qr(augmented)
    diag = np.abs(np.diag(r_mat))
    if diag.min() <= 1e-12 * max(diag.max(), 1.0):
        raise SingularSystem(
            "penalized basis system is singular; too few distinct x values "
            "for this basis size"
        )
    rhs = q_mat.T @ np.concatenate([y, np.zeros(len(d_mat))])
    coef = np.linalg.solve(r_mat, rhs)
    r_inv = np.linalg.inv(r_mat)
    influence = design @ r_inv  # row i gives hat-matrix row weights
    edf = float(np.sum(influence * influence))
    fitted = design @ coef
    rss = float(np.sum((y - fitted) ** 2))
    return coef, edf, rss, r_inv


def fit_gam(series: RoundSeries, config: GamConfig | None = None, *,
            force_lambda: float | None = None) -> GamFit:
    """Penalized cubic B-spline regression with GCV-selected lambda.

    GCV(lambda) = n rss / (n - edf)^2 over config.lambda_grid; force_lambda
    bypasses the search (test and diagnostics hook). The pointwise band is
    the usual posterior one: variance from sigma^2 (B'B + lam P)^{-1}
    propagated through the basis, with a normal critical value.
    """
    if config is None:
        config = GamConfig()
    n = len(series)
    if n < 5:
        raise InsufficientData(f"need at least 5 rounds for a smooth, got {n}")
    x, y = series.x, series.y
    knots = _uniform_knots(float(x.min()), float(x.max()), config.basis_size)
    design = _design(x, knots)
    d_mat = np.diff(np.eye(config.basis_size), config.penalty_order, axis=0)

    def objective(lam):
        coef, edf, rss, r_inv = _solve_penalized(design, y, d_mat, lam)
        denom = n - edf
        gcv = math.inf if denom <= 0 else n * rss / denom ** 2
        return coef, edf, rss, r_inv, gcv

    if force_lambda is not None:
        lam = float(force_lambda)
        coef, edf, rss, r_inv, gcv = objective(lam)
    else:
        best = None
        for candidate in config.lambda_grid:
            solved = objective(candidate)
            if best is None or solved[4] < best[1][4]:
                best = (candidate, solved)
        lam, (coef, edf, rss, r_inv, gcv) = best

    denom = n - edf
    sigma2 = rss / denom if denom > 1e-8 else 0.0

    grid_x = np.linspace(float(x.min()), float(x.max()), config.grid_points)
    grid_design = _design(grid_x, knots)
    curve = grid_design @ coef
    scaled = grid_design @ r_inv
    std_err = np.sqrt(np.maximum(sigma2 * np.sum(scaled * scaled, axis=1), 0.0))
    z = float(ndtri(0.5 + config.ci_level / 2.0))
    return GamFit(
        knots=knots,
        coefficients=coef,
        lam=lam,
        edf=edf,
        rss=rss,
        sigma2=sigma2,
        gcv=gcv,
        aic=_aic_or_none(n, rss, edf),
        grid_x=grid_x,
        curve=curve,
        lower=curve - z * std_err,
        upper=curve + z * std_err,
        covariance=sigma2 * (r_inv @ r_inv.T),
    )


# --- derivative profile and peak detection ------------------------------------

@dataclass(frozen=True)
class DerivativeProfile:
    grid_x: np.ndarray
    derivative: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


def derivative_profile(fit: GamFit) -> DerivativeProfile:
    """Finite-difference slope of the smooth and of its band edges.

    Central differences inside, one-sided at the ends (np.gradient). The
    differenced band edges are reordered pointwise so lower <= upper; the
    pair brackets the curve's own derivative by construction.
    """
    d_curve = np.gradient(fit.curve, fit.grid_x)
    d_lo = np.gradient(fit.lower, fit.grid_x)
    d_hi = np.gradient(fit.upper, fit.grid_x)
    return DerivativeProfile(
        fit.grid_x,
        d_curve,
        np.minimum(d_lo, d_hi),
        np.maximum(d_lo, d_hi),
    )


def _longest_true_run(mask: np.ndarray) -> int:
    best = run = 0
    for flag in mask:
        run = run + 1 if flag else 0
        best = max(best, run)
    return best


def detect_inverted_u(fit: GamFit, profile: DerivativeProfile,
                      rho: float = DEFAULT_RHO) -> tuple[float, float] | None:
    """Return (peak_round, peak_value) when the smooth rises then falls.

    Three conjunctive criteria on the derivative grid:

    (i)   exactly one sign change, positive to negative, judging signs only
          where |derivative| > 1e-9 so flat-fit chatter does not count;
    (ii)  positive mean derivative before the crossing, negative after;
    (iii) the derivative band excludes zero on a contiguous run covering at
          least fraction rho of the grid points on each side.

    The crossing is located by linear interpolation between the bracketing
    grid points and the peak value read off the smooth there.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must be in (0, 1]")
    d = profile.derivative
    grid_x = profile.grid_x
    definite = np.flatnonzero(np.abs(d) > SIGN_EPS)
    if definite.size == 0:
        return None
    signs = np.sign(d[definite])
    changes = np.flatnonzero(signs[1:] != signs[:-1])
    if changes.size != 1:
        return None
    change = int(changes[0])
    if not (signs[change] > 0 and signs[change + 1] < 0):
        return None

    first_negative = int(definite[change + 1])
    k = int(definite[change]) + 1
    while d[k] >= 0.0 and k < first_negative:
        k += 1
    x0, x1 = grid_x[k - 1], grid_x[k]
    d0, d1 = d[k - 1], d[k]
    peak_x = float(x0 + d0 * (x1 - x0) / (d0 - d1))

    pre = grid_x < peak_x
    post = grid_x > peak_x
    if not pre.any() or not post.any():
        return None
    if not (d[pre].mean() > 0.0 and d[post].mean() < 0.0):
        return None
    pre_run = _longest_true_run(profile.lower[pre] > 0.0)
    post_run = _longest_true_run(profile.upper[post] < 0.0)
    if pre_run < rho * pre.sum() - 1e-9 or post_run < rho * post.sum() - 1e-9:
        return None

    peak_value = float(fit.evaluate(peak_x)[0])
    return peak_x, peak_value


# --- verdicts ------------------------------------------------------------------

class Verdict(Enum):
    INVERTED_U = "InvertedU"
    INCREASING = "Increasing"
    DECREASING = "Decreasing"
    NO_TREND = "NoTrend"


@dataclass(frozen=True)
class TrendClassification:
    verdict: Verdict
    peak_round: float | None
    peak_value: float | None
    delta_aic: float | None  # AIC(line) - AIC(smooth); positive favors the smooth
    anova: AnovaResult
    linear: LinearFit
    gam: GamFit
    note: str = ""


def classify_trend(series: RoundSeries, groups,
                   config: GamConfig | None = None, *,
                   rho: float = DEFAULT_RHO,
                   alpha: float = DEFAULT_ALPHA) -> TrendClassification:
    """Assign one of four trend verdicts to a round trajectory.

    InvertedU demands both the derivative-shape detection and an AIC margin
    above 2 over the line; a detected peak whose smooth cannot beat the line
    by that margin is not reported as a peak. Otherwise a significant slope
    (two-sided p < alpha) gives Increasing or Decreasing by sign, and
    anything else is NoTrend. groups holds the raw per-round score samples
    for the accompanying ANOVA.
    """
    anova = anova_one_way(groups)
    linear = fit_linear(series)
    gam = fit_gam(series, config)
    detection = detect_inverted_u(gam, derivative_profile(gam), rho=rho)

    note = ""
    if linear.aic is None or gam.aic is None:
        delta_aic = None
        note = ("rss under the AIC noise floor; "
                "AIC gate unavailable, slope verdicts only")
    else:
        delta_aic = linear.aic - gam.aic

    peak_round = peak_value = None
    if detection is not None and delta_aic is not None and delta_aic > AIC_GATE:
        verdict = Verdict.INVERTED_U
        peak_round, peak_value = detection
    elif linear.slope_p < alpha and linear.alpha1 > 0:
        verdict = Verdict.INCREASING
    elif linear.slope_p < alpha and linear.alpha1 < 0:
        verdict = Verdict.DECREASING
    else:
        verdict = Verdict.NO_TREND
    return TrendClassification(verdict, peak_round, peak_value, delta_aic,
                               anova, linear, gam, note)
