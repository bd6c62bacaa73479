"""Trend analysis: ANOVA, AIC, penalized smooths, and the peak detector.

Independent oracles: mpmath high-precision evaluations of the AIC formula
and of the F / t tail integrals, closed-form OLS, and analytic parabola
peaks. Seeded noisy fixtures freeze the expected verdicts.
"""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agxai.errors import (
    DegenerateWithinVariance,
    InsufficientData,
    RssUnderflow,
    SingularSystem,
)
from agxai.trajectory_stats import (
    AIC_GATE,
    DEFAULT_RHO,
    GamConfig,
    RoundSeries,
    Verdict,
    Z_95,
    aic,
    anova_one_way,
    classify_trend,
    derivative_profile,
    detect_inverted_u,
    f_sf,
    fit_gam,
    fit_linear,
    t_sf_two_sided,
)

mpmath.mp.dps = 50

X11 = np.arange(11.0)


def _series(y) -> RoundSeries:
    return RoundSeries(X11, np.asarray(y, dtype=np.float64))


def _noisy_parabola(seed: int, peak: float = 4.0, a: float = 0.05,
                    c: float = 5.0, sd: float = 0.05) -> RoundSeries:
    rng = np.random.default_rng(seed)
    return _series(-a * (X11 - peak) ** 2 + c + rng.normal(0.0, sd, 11))


def _groups_from_series(series: RoundSeries, spread: float = 0.5):
    # three raw scores per round, mean-preserving, so ANOVA has within-variance
    return [[y - spread, y, y + spread] for y in series.y]


# --- tail probabilities ------------------------------------------------------------

def _mp_f_sf(f, d1, d2):
    return float(mpmath.betainc(d2 / 2, d1 / 2, 0, d2 / (d2 + d1 * f),
                                regularized=True))


def _mp_t_sf_two_sided(t, df):
    return float(mpmath.betainc(df / 2, mpmath.mpf(1) / 2, 0,
                                df / (df + t * t), regularized=True))


@pytest.mark.parametrize("f,d1,d2", [
    (13.5, 1, 4), (1.0, 3, 10), (0.5, 2, 7), (4.2, 5, 20),
    (2.75, 10, 2), (100.0, 1, 1),
])
def test_f_tail_matches_high_precision(f, d1, d2):
    assert f_sf(f, d1, d2) == pytest.approx(_mp_f_sf(f, d1, d2), abs=1e-6)


@pytest.mark.parametrize("t,df", [
    (2.0, 9), (-2.0, 9), (0.5, 3), (4.303, 2), (1.812, 10), (12.706, 1),
])
def test_t_tail_matches_high_precision(t, df):
    assert t_sf_two_sided(t, df) == pytest.approx(
        _mp_t_sf_two_sided(t, df), abs=1e-6)


def test_tail_edge_values():
    assert f_sf(0.0, 3, 5) == 1.0
    assert t_sf_two_sided(0.0, 7) == 1.0


# --- ANOVA --------------------------------------------------------------------------

def test_anova_equal_means_gives_zero_f():
    result = anova_one_way([[1.0, 3.0], [2.0, 2.0]])
    assert result.f_stat == 0.0
    assert result.p_value == 1.0


def test_anova_hand_computed_example():
    # SSB = 13.5, SSW = 4, df = (1, 4) -> F = 13.5
    result = anova_one_way([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert result.f_stat == pytest.approx(13.5, abs=1e-12)
    assert result.df_between == 1
    assert result.df_within == 4
    assert result.p_value == pytest.approx(0.0213, abs=1e-3)
    assert result.p_value == pytest.approx(_mp_f_sf(13.5, 1, 4), abs=1e-12)


def test_anova_matches_brute_force_decomposition():
    rng = np.random.default_rng(40)
    groups = [list(rng.normal(loc, 1.0, size=6)) for loc in (0.0, 0.5, 1.2)]
    result = anova_one_way(groups)
    all_values = np.concatenate(groups)
    grand = all_values.mean()
    ssb = sum(len(g) * (np.mean(g) - grand) ** 2 for g in groups)
    ssw = sum(np.sum((np.asarray(g) - np.mean(g)) ** 2) for g in groups)
    f_ref = (ssb / 2) / (ssw / (len(all_values) - 3))
    assert result.f_stat == pytest.approx(f_ref, rel=1e-10)


def test_anova_degenerate_within_variance():
    with pytest.raises(DegenerateWithinVariance):
        anova_one_way([[2.0, 2.0], [3.0, 3.0]])


def test_anova_preconditions():
    with pytest.raises(InsufficientData):
        anova_one_way([[1.0, 2.0]])
    with pytest.raises(InsufficientData):
        anova_one_way([[1.0, 2.0], [3.0]])


# --- AIC ----------------------------------------------------------------------------

def _mp_aic(n, rss, k):
    n, rss, k = mpmath.mpf(n), mpmath.mpf(rss), mpmath.mpf(k)
    return float(n * (mpmath.log(2 * mpmath.pi) + 1 + mpmath.log(rss / n)) + 2 * k)


def test_aic_formula_anchor():
    # n(ln 2pi + 1) + 2k with rss = n: the log(rss/n) term vanishes
    assert aic(11, 11.0, 2) == pytest.approx(_mp_aic(11, 11, 2), abs=1e-9)
    assert aic(11, 11.0, 2) == pytest.approx(11 * (math.log(2 * math.pi) + 1) + 4,
                                             abs=1e-12)


def test_aic_single_observation_anchor():
    assert aic(1, 1.0, 0) == pytest.approx(_mp_aic(1, 1, 0), abs=1e-9)
    assert aic(1, 1.0, 0) == pytest.approx(2.8378770664093453, abs=1e-12)


def test_aic_zero_rss_underflows():
    with pytest.raises(RssUnderflow):
        aic(11, 0.0, 2)
    with pytest.raises(RssUnderflow):
        aic(11, 1e-11, 2)  # at/below the 1e-12 * n floor
    with pytest.raises(ValueError):
        aic(0, 1.0, 2)


@settings(deadline=None, max_examples=60)
@given(
    st.integers(min_value=1, max_value=500),
    st.floats(min_value=1e-6, max_value=1e6),
    st.floats(min_value=1e-6, max_value=1e6),
    st.floats(min_value=0.0, max_value=50.0),
)
def test_aic_monotone_in_rss(n, rss_a, rss_b, k):
    lo, hi = sorted((rss_a, rss_b))
    if lo == hi:
        return
    assert aic(n, lo, k) < aic(n, hi, k)


# --- OLS baseline --------------------------------------------------------------------

def test_fit_linear_exact_line():
    fit = fit_linear(_series(2.0 * X11 + 1.0))
    assert fit.alpha1 == pytest.approx(2.0, abs=1e-12)
    assert fit.alpha0 == pytest.approx(1.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.rss == pytest.approx(0.0, abs=1e-20)
    assert fit.slope_p == 0.0
    assert fit.aic is None  # rss underflows the noise floor


def test_fit_linear_constant_series():
    fit = fit_linear(_series(np.full(11, 3.25)))
    assert fit.alpha1 == 0.0
    assert fit.alpha0 == 3.25
    assert fit.slope_p == 1.0
    assert fit.r2 == 0.0


def test_fit_linear_hand_computed():
    fit = fit_linear(RoundSeries(np.array([0.0, 1.0, 2.0]),
                                 np.array([0.0, 1.0, 3.0])))
    assert fit.alpha1 == pytest.approx(1.5, abs=1e-12)
    assert fit.alpha0 == pytest.approx(-1.0 / 6.0, abs=1e-12)
    assert fit.rss == pytest.approx(1.0 / 6.0, abs=1e-12)
    np.testing.assert_allclose(np.sum(fit.residuals ** 2), fit.rss, atol=1e-15)


def test_fit_linear_slope_p_matches_reference_formula():
    rng = np.random.default_rng(42)
    y = 0.3 * X11 + rng.normal(0.0, 0.4, 11)
    fit = fit_linear(_series(y))
    n = 11
    sxx = float(np.sum((X11 - X11.mean()) ** 2))
    t_stat = fit.alpha1 / math.sqrt(fit.rss / (n - 2) / sxx)
    assert fit.slope_p == pytest.approx(_mp_t_sf_two_sided(t_stat, n - 2),
                                        abs=1e-12)


def test_fit_linear_needs_three_points():
    with pytest.raises(InsufficientData):
        fit_linear(RoundSeries(np.array([0.0, 1.0]), np.array([1.0, 2.0])))


def test_round_series_validation():
    with pytest.raises(ValueError):
        RoundSeries(np.array([0.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        RoundSeries(np.array([0.0, 1.0]), np.zeros(3))


# --- penalized smooth -----------------------------------------------------------------

def test_gam_config_validation():
    with pytest.raises(ValueError):
        GamConfig(basis_size=3)
    with pytest.raises(ValueError):
        GamConfig(penalty_order=0)
    with pytest.raises(ValueError):
        GamConfig(lambda_grid=())
    with pytest.raises(ValueError):
        GamConfig(ci_level=1.5)
    with pytest.raises(ValueError):
        GamConfig(grid_points=2)


def test_gam_needs_five_points():
    with pytest.raises(InsufficientData):
        fit_gam(RoundSeries(np.arange(4.0), np.arange(4.0)))


def test_high_lambda_limit_is_the_ols_line():
    series = _noisy_parabola(3)
    linear = fit_linear(series)
    fit = fit_gam(series, force_lambda=1e9)
    line = linear.alpha0 + linear.alpha1 * fit.grid_x
    assert float(np.max(np.abs(fit.curve - line))) < 1e-4
    assert fit.edf == pytest.approx(2.0, abs=1e-6)


def test_zero_lambda_saturated_basis_interpolates():
    series = _noisy_parabola(4)
    fit = fit_gam(series, GamConfig(basis_size=11), force_lambda=0.0)
    assert fit.rss < 1e-10
    assert fit.aic is None  # interpolation underflows the AIC floor


def test_noiseless_parabola_peak_recovery():
    series = _series(-0.05 * (X11 - 4.0) ** 2 + 5.0)
    fit = fit_gam(series)
    top = int(np.argmax(fit.curve))
    assert abs(fit.grid_x[top] - 4.0) < 0.25
    assert abs(fit.curve[top] - 5.0) < 0.05


def test_gam_edf_bounds_and_band_ordering():
    for seed in (0, 1, 2):
        fit = fit_gam(_noisy_parabola(seed))
        assert 1.0 < fit.edf <= 10.0
        assert (fit.lower <= fit.curve + 1e-12).all()
        assert (fit.curve <= fit.upper + 1e-12).all()


def test_gam_covariance_reproduces_band():
    from agxai.trajectory_stats import _design

    fit = fit_gam(_noisy_parabola(5))
    design = _design(fit.grid_x, fit.knots)
    se = np.sqrt(np.maximum(
        np.sum((design @ fit.covariance) * design, axis=1), 0.0))
    np.testing.assert_allclose(fit.upper - fit.curve, Z_95 * se, atol=1e-12)


def test_gam_gcv_picks_grid_member():
    config = GamConfig()
    fit = fit_gam(_noisy_parabola(6), config)
    assert fit.lam in config.lambda_grid


def test_gam_evaluate_matches_grid_curve():
    fit = fit_gam(_noisy_parabola(7))
    np.testing.assert_allclose(fit.evaluate(fit.grid_x), fit.curve, atol=1e-12)


def test_gam_singular_when_too_few_distinct_x():
    # 5 points cannot identify a 10-function unpenalized basis
    series = RoundSeries(np.arange(5.0), np.array([1.0, 2.0, 1.5, 3.0, 2.5]))
    with pytest.raises(SingularSystem):
        fit_gam(series, force_lambda=0.0)


def test_z_95_constant():
    assert Z_95 == 1.959963984540054


# --- derivative profile ----------------------------------------------------------------

def test_derivative_of_linear_fit_is_the_slope():
    series = _series(2.0 * X11 + 1.0)
    profile = derivative_profile(fit_gam(series, force_lambda=1e9))
    np.testing.assert_allclose(profile.derivative, 2.0, atol=1e-3)


def test_derivative_sign_change_near_parabola_peak():
    series = _series(-0.05 * (X11 - 4.0) ** 2 + 5.0)
    profile = derivative_profile(fit_gam(series))
    signs = np.sign(profile.derivative)
    flips = np.flatnonzero(np.diff(signs) != 0)
    assert len(flips) == 1
    crossing = profile.grid_x[flips[0]]
    assert abs(crossing - 4.0) < 0.25


def test_derivative_of_constant_fit_brackets_zero():
    profile = derivative_profile(fit_gam(_series(np.full(11, 3.0))))
    assert float(np.max(np.abs(profile.derivative))) < 1e-6
    assert (profile.lower <= 1e-9).all()
    assert (profile.upper >= -1e-9).all()


def test_derivative_band_brackets_derivative_on_noisy_flat_series():
    rng = np.random.default_rng(8)
    series = _series(3.0 + rng.normal(0.0, 0.1, 11))
    profile = derivative_profile(fit_gam(series))
    assert float(np.max(np.abs(profile.derivative))) < 0.2
    assert (profile.lower <= profile.derivative + 1e-12).all()
    assert (profile.derivative <= profile.upper + 1e-12).all()


def test_derivative_band_brackets_derivative():
    for seed in (0, 3, 9):
        fit = fit_gam(_noisy_parabola(seed))
        profile = derivative_profile(fit)
        assert (profile.lower <= profile.derivative + 1e-12).all()
        assert (profile.derivative <= profile.upper + 1e-12).all()


# --- peak detection ---------------------------------------------------------------------

def test_detect_seeded_parabola():
    fit = fit_gam(_noisy_parabola(3))
    found = detect_inverted_u(fit, derivative_profile(fit))
    assert found is not None
    peak_round, peak_value = found
    assert 3.5 <= peak_round <= 4.5
    assert peak_value == pytest.approx(float(fit.evaluate(peak_round)[0]),
                                       abs=1e-12)


def test_detect_rejects_increasing_line():
    series = _series(0.3 * X11 + 1.0)
    fit = fit_gam(series)
    assert detect_inverted_u(fit, derivative_profile(fit)) is None


def test_detect_rejects_decreasing_line():
    series = _series(-0.3 * X11 + 6.0)
    fit = fit_gam(series)
    assert detect_inverted_u(fit, derivative_profile(fit)) is None


def test_detect_rejects_u_shape():
    series = _series(0.05 * (X11 - 5.0) ** 2 + 1.0)
    fit = fit_gam(series)
    assert detect_inverted_u(fit, derivative_profile(fit)) is None


def test_peak_interpolation_converges_with_noise():
    # noiseless members of the -a(x-p)^2 + c family pin the peak within 0.25
    for a, p in [(0.05, 4.0), (0.1, 5.0), (0.03, 6.0)]:
        series = _series(-a * (X11 - p) ** 2 + 5.0)
        fit = fit_gam(series)
        found = detect_inverted_u(fit, derivative_profile(fit))
        assert found is not None, (a, p)
        assert abs(found[0] - p) < 0.25, (a, p)


def test_detect_rho_validation():
    fit = fit_gam(_noisy_parabola(3))
    profile = derivative_profile(fit)
    with pytest.raises(ValueError):
        detect_inverted_u(fit, profile, rho=0.0)
    with pytest.raises(ValueError):
        detect_inverted_u(fit, profile, rho=1.5)


def test_detect_strict_rho_fails_weak_evidence():
    # very high rho demands near-everywhere CI exclusion; noisy data cannot
    fit = fit_gam(_noisy_parabola(3, sd=0.5))
    profile = derivative_profile(fit)
    assert detect_inverted_u(fit, profile, rho=0.999) is None


# --- verdicts ---------------------------------------------------------------------------

def test_classify_seeded_parabola_is_inverted_u():
    series = _noisy_parabola(3)
    result = classify_trend(series, _groups_from_series(series))
    assert result.verdict is Verdict.INVERTED_U
    assert result.delta_aic is not None and result.delta_aic > AIC_GATE
    assert 3.5 <= result.peak_round <= 4.5
    assert result.peak_value == pytest.approx(
        float(result.gam.evaluate(result.peak_round)[0]), abs=1e-12)


def test_classify_noiseless_increasing_line():
    series = _series(0.3 * X11 + 1.0)
    result = classify_trend(series, _groups_from_series(series))
    assert result.verdict is Verdict.INCREASING
    assert result.peak_round is None
    assert result.linear.slope_p < 1e-10
    # the exact line underflows the AIC floor, so the gate is unavailable
    assert result.delta_aic is None
    assert "noise floor" in result.note


def test_classify_noisy_increasing_line():
    rng = np.random.default_rng(10)
    series = _series(0.3 * X11 + 1.0 + rng.normal(0.0, 0.1, 11))
    result = classify_trend(series, _groups_from_series(series))
    assert result.verdict is Verdict.INCREASING
    assert result.delta_aic is not None


def test_classify_decreasing():
    rng = np.random.default_rng(11)
    series = _series(-0.4 * X11 + 6.0 + rng.normal(0.0, 0.1, 11))
    result = classify_trend(series, _groups_from_series(series))
    assert result.verdict is Verdict.DECREASING


def test_classify_seeded_constant_noise_is_no_trend():
    rng = np.random.default_rng(12)
    series = _series(3.0 + rng.normal(0.0, 0.1, 11))
    result = classify_trend(series, _groups_from_series(series))
    assert result.verdict is Verdict.NO_TREND
    assert result.linear.slope_p > 0.05


def test_gate_is_conjunctive_never_inverted_u_without_aic_margin():
    # structurally: delta_aic <= 2 forces a non-peak verdict even if the
    # derivative detection succeeded on the same smooth
    series = _noisy_parabola(3)
    result = classify_trend(series, _groups_from_series(series))
    detection = detect_inverted_u(result.gam, derivative_profile(result.gam))
    assert detection is not None
    weak = [r for r in [result] if r.delta_aic is not None and r.delta_aic <= 2]
    assert not weak  # this fixture clears the gate; the converse case below

    # monotone saturating curve: GAM beats the line by AIC, but there is no
    # sign change, so the conjunction must refuse InvertedU
    saturating = _series(4.0 * (1.0 - np.exp(-0.6 * X11)))
    sat_result = classify_trend(saturating, _groups_from_series(saturating))
    assert sat_result.delta_aic is not None and sat_result.delta_aic > AIC_GATE
    assert detect_inverted_u(sat_result.gam,
                             derivative_profile(sat_result.gam)) is None
    assert sat_result.verdict is not Verdict.INVERTED_U
    assert sat_result.verdict is Verdict.INCREASING


def test_classification_carries_component_results():
    series = _noisy_parabola(3)
    result = classify_trend(series, _groups_from_series(series))
    assert result.anova.f_stat > 0
    assert result.gam.aic is not None
    assert result.linear.aic is not None
    assert result.delta_aic == pytest.approx(result.linear.aic - result.gam.aic)
