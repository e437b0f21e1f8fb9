import math

import numpy as np
import pytest
from scipy import integrate, stats

from mesugaki import (ContractViolationError, CoxRate, CustomRate,
                      DeterministicRate, DomainError, DrivingPath, ExpKernel,
                      HawkesRate, HomogeneousRate, PathHistory,
                      RunawayProcessError, SumRate, UnsupportedModelError,
                      compensator, compensator_at_times, derive_stream,
                      dominating_rate, intensity_at, simulate_counting)
from mesugaki.point_process import GenericKernel

SEED = 1729
EMPTY = PathHistory()


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def test_exp_kernel_closed_forms():
    k = ExpKernel(0.5, 1.0)
    assert k(0.0) == 0.5
    assert k(2.0) == pytest.approx(0.5 * math.exp(-2.0))
    assert k.total_mass == pytest.approx(0.5)
    with pytest.raises(DomainError):
        ExpKernel(-0.1, 1.0)
    with pytest.raises(DomainError):
        ExpKernel(0.5, 0.0)


def test_generic_kernel_estimates_mass():
    k = GenericKernel(lambda u: math.exp(-2.0 * u))
    assert k.total_mass == pytest.approx(0.5, rel=1e-4)
    assert k(k.horizon + 1.0) == 0.0


def test_generic_kernel_requires_mass_when_no_decay():
    with pytest.raises(UnsupportedModelError):
        GenericKernel(lambda u: 1.0)
    k = GenericKernel(lambda u: 1.0, total_mass=3.0, horizon=3.0)
    assert k.total_mass == 3.0


# ---------------------------------------------------------------------------
# intensity models
# ---------------------------------------------------------------------------

def test_homogeneous_rate_and_bound():
    m = HomogeneousRate(2.0)
    assert m.rate(3.0, EMPTY) == 2.0
    assert dominating_rate(m, 0.0, EMPTY, 1.0) >= 2.0
    with pytest.raises(DomainError):
        HomogeneousRate(-1.0)


def test_deterministic_rate_windowed_bound_covers_the_sup():
    m = DeterministicRate(lambda t: t)
    # sup of t over [1, 2) is 2; the sampled bound may pad it slightly
    d = m.dominating(1.0, EMPTY, 1.0)
    assert 2.0 <= d <= 2.0 * 1.01


def test_negative_intensity_is_a_contract_violation():
    m = DeterministicRate(lambda t: -1.0)
    with pytest.raises(ContractViolationError):
        m.dominating(0.0, EMPTY, 1.0)


def test_cox_rate_reads_the_driving_path():
    drv = DrivingPath((0.0, 2.0), (0.0, 2.0), "linear")
    m = CoxRate(lambda x: 1.0 + x * x, drv)
    hist = PathHistory((), driving_path=drv)
    assert m.rate(1.0, hist) == pytest.approx(2.0)
    assert intensity_at(m, 2.0, hist) == pytest.approx(5.0)


def test_hawkes_intensity_uses_strict_past():
    m = HawkesRate(1.0, ExpKernel(0.5, 1.0))
    hist = PathHistory(((0.5, 1.0), (1.0, 1.0)))
    # at t = 1.0 the event at 1.0 is not yet visible
    assert m.rate(1.0, hist) == pytest.approx(1.0 + 0.5 * math.exp(-0.5))
    # the right limit sees it
    assert m.rate_right(1.0, hist) == pytest.approx(
        1.0 + 0.5 * math.exp(-0.5) + 0.5)
    assert m.branching_ratio == pytest.approx(0.5)


def test_sum_rate_adds_components():
    m = SumRate((HomogeneousRate(1.0), HomogeneousRate(2.5)))
    assert m.rate(0.0, EMPTY) == pytest.approx(3.5)
    assert m.dominating(0.0, EMPTY, 1.0) >= 3.5


def test_custom_rate_requires_a_declared_bound_to_simulate():
    m = CustomRate(lambda t, h: 1.0)
    with pytest.raises(UnsupportedModelError):
        simulate_counting(m, 1.0, derive_stream(SEED, 0))


def test_lying_bound_raises_contract_violation():
    m = CustomRate(lambda t, h: 1.0, bound=lambda t, h, la: 0.25)
    with pytest.raises(ContractViolationError):
        simulate_counting(m, 50.0, derive_stream(SEED, 1))


def test_event_cap_raises_runaway():
    with pytest.raises(RunawayProcessError):
        simulate_counting(HomogeneousRate(100.0), 10.0,
                          derive_stream(SEED, 2), cap=5)


def test_horizon_validation():
    with pytest.raises(DomainError):
        simulate_counting(HomogeneousRate(1.0), 0.0, derive_stream(SEED, 3))
    with pytest.raises(DomainError):
        simulate_counting(HomogeneousRate(1.0), math.inf, derive_stream(SEED, 3))


def test_unstable_hawkes_is_refused():
    with pytest.raises(DomainError):
        simulate_counting(HawkesRate(1.0, ExpKernel(2.0, 1.0)), 1.0,
                          derive_stream(SEED, 4))


# ---------------------------------------------------------------------------
# thinning: distributional checks
# ---------------------------------------------------------------------------

def test_homogeneous_counts_are_poisson():
    lam, T, n = 2.0, 1.0, 4000
    counts = np.array([len(simulate_counting(HomogeneousRate(lam), T,
                                             derive_stream(SEED, 100, i)))
                       for i in range(n)])
    obs = np.bincount(counts, minlength=8).astype(float)
    obs_b = np.append(obs[:7], obs[7:].sum())
    exp_b = stats.poisson.pmf(np.arange(7), lam) * n
    exp_b = np.append(exp_b, n - exp_b.sum())
    p = stats.chisquare(obs_b, exp_b).pvalue
    assert p > 1e-3, f"chi-square p={p}"


def test_inhomogeneous_event_times_follow_the_rate_profile():
    # for a Poisson process with rate t on [0, 2] the pooled event times are
    # iid with cdf t^2 / 4, and the expected count is 2
    T, n = 2.0, 3000
    m = DeterministicRate(lambda t: t)
    pooled, total = [], 0
    for i in range(n):
        evs = simulate_counting(m, T, derive_stream(SEED, 101, i))
        total += len(evs)
        pooled.extend(e.time for e in evs)
    assert abs(total / n - 2.0) < 4 * math.sqrt(2.0 / n)
    p = stats.kstest(pooled, lambda t: np.asarray(t) ** 2 / 4.0).pvalue
    assert p > 1e-3, f"KS p={p}"


def test_exp_hawkes_recursion_agrees_with_generic_thinning():
    # the closed-form Hawkes path and a generic windowed run of the same
    # intensity must produce the same law of N_T
    fast = HawkesRate(1.0, ExpKernel(1.0, 2.0))
    slow = CustomRate(fast.rate, bound=lambda t, h, la: fast.rate_right(t, h))
    n = 2500
    a = np.array([len(simulate_counting(fast, 3.0, derive_stream(SEED, 102, i)))
                  for i in range(n)])
    b = np.array([len(simulate_counting(slow, 3.0, derive_stream(SEED, 103, i)))
                  for i in range(n)])
    p = stats.ks_2samp(a, b).pvalue
    assert p > 1e-3, f"KS p={p}"
    assert abs(a.mean() - b.mean()) < 5 * math.sqrt(a.var() / n + b.var() / n)


def test_cox_counts_match_the_integrated_rate():
    T = 4.0
    drv = DrivingPath((0.0, T), (0.0, T), "linear")
    m = CoxRate(lambda x: 1.0 + math.sin(x) ** 2, drv)
    lam_T = 1.5 * T - math.sin(2 * T) / 4.0
    n = 2000
    counts = np.array([len(simulate_counting(m, T, derive_stream(SEED, 104, i)))
                       for i in range(n)])
    se = counts.std(ddof=1) / math.sqrt(n)
    assert abs(counts.mean() - lam_T) < 4 * se


# ---------------------------------------------------------------------------
# compensators
# ---------------------------------------------------------------------------

def test_homogeneous_compensator_closed_form():
    assert compensator(HomogeneousRate(2.0), EMPTY, 3.0) == pytest.approx(6.0)


def test_hawkes_compensator_two_routes():
    m = HawkesRate(1.0, ExpKernel(0.5, 1.0))
    hist = PathHistory(((0.5, 1.0), (1.2, 1.0)))
    # hand formula: mu t + sum (alpha/beta)(1 - exp(-beta (t - t_i)))
    hand = 2.0 + 0.5 * (1 - math.exp(-1.5)) + 0.5 * (1 - math.exp(-0.8))
    lib = compensator(m, hist, 2.0)
    assert lib == pytest.approx(hand, abs=1e-12)
    quad, _ = integrate.quad(lambda s: m.rate(s, hist), 0.0, 2.0,
                             points=[0.5, 1.2], limit=200)
    assert lib == pytest.approx(quad, abs=1e-7)


def test_generic_quadrature_compensator_agrees_with_closed_form():
    # wrap the Hawkes rule in a CustomRate so the library cannot use the
    # closed form, then compare both routes on the same history
    m = HawkesRate(1.0, ExpKernel(0.5, 1.0))
    wrapped = CustomRate(m.rate)
    hist = PathHistory(((0.5, 1.0), (1.2, 1.0)))
    lib = compensator(m, hist, 2.0)
    quad = compensator(wrapped, hist, 2.0, quad_step=1e-4)
    assert quad == pytest.approx(lib, abs=1e-6)


def test_cox_compensator_closed_form():
    T = 4.0
    drv = DrivingPath((0.0, T), (0.0, T), "linear")
    m = CoxRate(lambda x: 1.0 + math.sin(x) ** 2, drv)
    hist = PathHistory((), driving_path=drv)
    for t in (1.0, 2.0, 4.0):
        closed = 1.5 * t - math.sin(2 * t) / 4.0
        assert compensator(m, hist, t, quad_step=1e-3) == pytest.approx(
            closed, abs=1e-6)


def test_compensator_at_times_matches_pointwise_calls():
    m = HawkesRate(1.0, ExpKernel(0.5, 1.0))
    hist = PathHistory(((0.3, 1.0), (0.9, 1.0), (1.7, 1.0)))
    ts = [0.3, 0.9, 1.3, 1.7, 2.0]
    batch = compensator_at_times(m, hist, ts)
    single = [compensator(m, hist, t) for t in ts]
    assert np.allclose(batch, single, atol=1e-10)
    assert all(a <= b + 1e-12 for a, b in zip(batch, batch[1:]))


def test_sum_rate_compensator_is_additive():
    m = SumRate((HomogeneousRate(1.0), HawkesRate(1.0, ExpKernel(0.5, 1.0))))
    hist = PathHistory(((0.5, 1.0),))
    parts = (compensator(HomogeneousRate(1.0), hist, 2.0)
             + compensator(HawkesRate(1.0, ExpKernel(0.5, 1.0)), hist, 2.0))
    assert compensator(m, hist, 2.0) == pytest.approx(parts, abs=1e-12)


def test_martingale_property_of_compensated_counts():
    # E[N_T - Lambda_T] = 0 for the Hawkes fast path
    m = HawkesRate(1.0, ExpKernel(1.0, 2.0))
    n, T = 3000, 3.0
    vals = np.empty(n)
    for i in range(n):
        evs = simulate_counting(m, T, derive_stream(SEED, 105, i))
        hist = PathHistory(evs, validate=False)
        vals[i] = len(evs) - compensator(m, hist, T)
    z = vals.mean() / (vals.std(ddof=1) / math.sqrt(n))
    assert abs(z) < 4.0, f"martingale z={z}"
