"""Moment summaries, martingale z-scores, residual pooling, KS machinery."""

import math

import numpy as np
import pytest
from scipy import special, stats

from mesugaki import (
    DomainError,
    EnsembleSummary,
    derive_stream,
    exponential_cdf,
    ks_one_sample,
    ks_two_sample,
    martingale_mean_test,
    paired_difference_test,
    step_path_sup_distance,
    time_change_residuals,
)
from mesugaki.diagnostics import _kolmogorov_survival

SEED = 20270218


# ---------------------------------------------------------------------------
# moment summaries
# ---------------------------------------------------------------------------

def test_ensemble_summary_hand_values():
    s = EnsembleSummary.of([1.0, 2.0, 3.0, 4.0])
    assert s.n == 4 and s.mean == 2.5
    assert s.variance == pytest.approx(5.0 / 3.0)
    assert s.standard_error == pytest.approx(math.sqrt(5.0 / 12.0))
    assert s.minimum == 1.0 and s.maximum == 4.0
    assert s.z_against(2.5) == 0.0
    assert s.z_against(2.0) == pytest.approx(0.5 / math.sqrt(5.0 / 12.0))


def test_ensemble_summary_degenerate_and_validation():
    s = EnsembleSummary.of([3.0, 3.0])
    assert s.standard_error == 0.0
    assert s.z_against(3.0) == 0.0
    assert s.z_against(2.0) == math.inf and s.z_against(4.0) == -math.inf
    with pytest.raises(DomainError):
        EnsembleSummary.of([1.0])
    with pytest.raises(DomainError):
        EnsembleSummary.of([[1.0, 2.0], [3.0, 4.0]])


def test_martingale_mean_test():
    rep = martingale_mean_test([1.0, -1.0, 1.0, -1.0])
    assert rep.n == 4 and rep.mean == 0.0 and rep.z == 0.0
    assert rep.standard_error == pytest.approx(math.sqrt(4.0 / 3.0) / 2.0)
    assert martingale_mean_test([0.0, 0.0]).z == 0.0
    assert martingale_mean_test([2.0, 2.0]).z == math.inf
    assert martingale_mean_test([-2.0, -2.0]).z == -math.inf
    with pytest.raises(DomainError):
        martingale_mean_test([1.0])


def test_paired_difference_test():
    a = [1.0, 2.0, 3.0]
    b = [0.5, 2.5, 2.0]
    rep = paired_difference_test(a, b)
    ref = martingale_mean_test(np.subtract(a, b))
    assert rep == ref
    assert paired_difference_test(a, a).z == 0.0
    with pytest.raises(DomainError):
        paired_difference_test([1.0, 2.0], [1.0, 2.0, 3.0])


# ---------------------------------------------------------------------------
# time-change residuals
# ---------------------------------------------------------------------------

def test_time_change_residuals_hand_values():
    pooled = time_change_residuals([[1.0, 2.5], [0.5]])
    np.testing.assert_allclose(pooled, [1.0, 1.5, 0.5])
    # empty paths contribute nothing
    np.testing.assert_allclose(time_change_residuals([[], [2.0]]), [2.0])
    assert time_change_residuals([]).size == 0
    assert time_change_residuals([[], []]).size == 0


def test_time_change_residuals_validation():
    with pytest.raises(DomainError):
        time_change_residuals([[2.0, 1.0]])
    with pytest.raises(DomainError):
        time_change_residuals([[-0.5, 1.0]])


def test_time_change_residuals_recover_exponentials():
    # feeding a cumulative sum of exponentials back through the pooling
    # reproduces the increments exactly, and they look Exp(1)
    rng = derive_stream(SEED, 60)
    draws = np.array([rng.exponential(1.0) for _ in range(2000)])
    pooled = time_change_residuals([np.cumsum(draws)])
    np.testing.assert_allclose(pooled, draws, rtol=1e-9, atol=1e-9)
    rep = ks_one_sample(pooled, exponential_cdf)
    assert rep.p_value > 1e-3


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------

def test_kolmogorov_survival_against_scipy():
    for lam in (0.3, 0.5, 0.8, 1.0, 1.36, 1.63, 2.0, 2.5):
        assert _kolmogorov_survival(lam) == pytest.approx(
            float(special.kolmogorov(lam)), abs=1e-12)
    assert _kolmogorov_survival(1e-12) == 1.0
    assert _kolmogorov_survival(10.0) == pytest.approx(0.0, abs=1e-12)


def _brute_ks_statistic(sample, cdf):
    xs = np.sort(np.asarray(sample, dtype=float))
    n = xs.size
    worst = 0.0
    for x in xs:
        fn_right = np.count_nonzero(xs <= x) / n
        fn_left = np.count_nonzero(xs < x) / n
        worst = max(worst, abs(fn_right - cdf(x)), abs(fn_left - cdf(x)))
    return worst


def test_ks_one_sample_against_scipy_and_brute_force():
    rng = derive_stream(SEED, 61)
    sample = [rng.uniform() for _ in range(400)]
    rep = ks_one_sample(sample, lambda x: min(1.0, max(0.0, x)))
    ref = stats.kstest(sample, "uniform", mode="asymp")
    assert rep.statistic == pytest.approx(ref.statistic, abs=1e-14)
    assert rep.statistic == pytest.approx(
        _brute_ks_statistic(sample, lambda x: min(1.0, max(0.0, x))), abs=1e-14)
    assert rep.p_value == pytest.approx(ref.pvalue, abs=1e-6)
    assert rep.n == 400 and rep.m is None


def test_ks_one_sample_validation():
    with pytest.raises(DomainError):
        ks_one_sample([], exponential_cdf)
    with pytest.raises(DomainError):
        ks_one_sample([0.5], lambda x: 2.0)


def test_ks_two_sample_against_scipy():
    rng = derive_stream(SEED, 62)
    a = [rng.normal(1.0) for _ in range(300)]
    b = [rng.normal(1.2) for _ in range(200)]
    rep = ks_two_sample(a, b)
    ref = stats.ks_2samp(a, b, mode="asymp")
    assert rep.statistic == pytest.approx(ref.statistic, abs=1e-14)
    # the library uses the plain pooled scaling (documented); scipy's asymp
    # p adds a finite-sample correction, so match it only loosely
    lam = rep.statistic * math.sqrt(300 * 200 / 500)
    assert rep.p_value == pytest.approx(float(special.kolmogorov(lam)),
                                        abs=1e-12)
    assert rep.p_value == pytest.approx(ref.pvalue, abs=0.05)
    assert rep.n == 300 and rep.m == 200


def test_ks_two_sample_with_ties():
    a = [1.0, 1.0, 2.0, 3.0]
    b = [1.0, 2.0, 2.0, 3.0]
    rep = ks_two_sample(a, b)
    ref = stats.ks_2samp(a, b, mode="asymp")
    assert rep.statistic == pytest.approx(ref.statistic, abs=1e-14)
    with pytest.raises(DomainError):
        ks_two_sample([], [1.0])


def test_exponential_cdf():
    assert exponential_cdf(0.0) == 0.0
    assert exponential_cdf(-1.0) == 0.0
    assert exponential_cdf(1.0) == pytest.approx(1.0 - math.exp(-1.0))
    assert exponential_cdf(50.0) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# step-path uniform distance
# ---------------------------------------------------------------------------

def test_step_path_sup_distance_hand_case():
    d = step_path_sup_distance([1.0, 3.0], [2.0, 3.0], [2.0], [1.0])
    assert d == pytest.approx(2.0)
    # identical paths, simultaneous jumps
    assert step_path_sup_distance([1.0], [1.0], [1.0], [1.0]) == 0.0
    # initial offsets count from t = 0
    assert step_path_sup_distance([], [], [], [], 5.0, 3.0) == 2.0


def test_step_path_sup_distance_simultaneous_jump():
    # both paths jump at t=2: the comparison happens after both updates
    d = step_path_sup_distance([2.0], [4.0], [2.0], [4.5])
    assert d == pytest.approx(0.5)


def test_step_path_sup_distance_validation():
    with pytest.raises(DomainError):
        step_path_sup_distance([1.0], [1.0, 2.0], [], [])
    with pytest.raises(DomainError):
        step_path_sup_distance([2.0, 1.0], [1.0, 2.0], [], [])


def test_step_path_sup_distance_matches_dense_grid():
    rng = derive_stream(SEED, 63)
    ta = np.sort([rng.uniform() * 10 for _ in range(8)])
    tb = np.sort([rng.uniform() * 10 for _ in range(5)])
    va = np.cumsum([rng.exponential(1.0) for _ in range(8)])
    vb = np.cumsum([rng.exponential(1.0) for _ in range(5)])
    d = step_path_sup_distance(ta, va, tb, vb)

    def value(times, vals, t):
        i = np.searchsorted(times, t, side="right")
        return 0.0 if i == 0 else vals[i - 1]

    grid = np.unique(np.concatenate([ta, tb, np.linspace(0, 10, 2001)]))
    dense = max(abs(value(ta, va, t) - value(tb, vb, t)) for t in grid)
    assert d == pytest.approx(dense, abs=1e-12)
