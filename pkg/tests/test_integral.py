"""Jump-side and compensator-side integrals, isometries, truncation sweeps."""

import json
import math

import numpy as np
import pytest

from mesugaki import (
    MARK_IDENTITY,
    MARK_SQUARE,
    DensityFormMeasure,
    DeterministicRate,
    DiscreteAtomsMeasure,
    DomainError,
    HomogeneousRate,
    Integrand,
    JumpEvent,
    PathHistory,
    PowerLawMarks,
    UniformMarks,
    Window,
    as_integrand,
    compensator_integral,
    derive_stream,
    integrate_compensated,
    integrate_jump,
    isometry_variance,
    large_jump_window,
    simulate_mesugaki,
    small_jump_window,
    truncation_sweep,
    truncation_window,
)
from mesugaki.core import EMPTY_HISTORY
from mesugaki.integral import _compensated_path_sup

SEED = 20270218


def cp_measure(rate=2.0):
    return DensityFormMeasure(HomogeneousRate(rate), UniformMarks(0.0, 1.0))


def sqrt_decay_measure(rate=2.0):
    # normalized density z^{-1/2}/2 on (0, 1]; infinite slope at 0 but
    # finite mass, the standard stress case for truncation
    return DensityFormMeasure(HomogeneousRate(rate), PowerLawMarks(-0.5, 0.0, 1.0))


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------

def test_window_contains_and_symmetry():
    w = Window(0.5, 2.0, True, False)
    assert w.contains(0.5) and w.contains(-0.5)
    assert w.contains(1.0) and w.contains(-1.99)
    assert not w.contains(2.0) and not w.contains(-2.0)
    assert not w.contains(0.49) and not w.contains(0.0)


def test_window_endpoint_coercion_and_validation():
    # closed at 0 or at infinity is meaningless; silently opened
    assert Window(0.0, 1.0, True, True).closed_lo is False
    assert Window(1.0, math.inf, True, True).closed_hi is False
    with pytest.raises(DomainError):
        Window(2.0, 1.0)
    with pytest.raises(DomainError):
        Window(-0.5, 1.0)
    with pytest.raises(DomainError):
        Window(math.nan, 1.0)


def test_window_regions():
    regs = Window(0.5, 1.0, True, False).regions()
    assert len(regs) == 2
    pos = [r for r in regs if r.lo > 0][0]
    neg = [r for r in regs if r.hi < 0][0]
    assert (pos.lo, pos.hi, pos.closed_lo, pos.closed_hi) == (0.5, 1.0, True, False)
    assert (neg.lo, neg.hi, neg.closed_lo, neg.closed_hi) == (-1.0, -0.5, False, True)
    # degenerate open window is empty
    assert Window(1.0, 1.0, False, False).regions() == ()


def test_window_factories():
    t4 = truncation_window(4.0)
    assert t4.lo == 0.25 and math.isinf(t4.hi) and not t4.closed_lo
    lj = large_jump_window()
    assert lj.lo == 1.0 and lj.closed_lo and math.isinf(lj.hi)
    capped = large_jump_window(3.0)
    assert capped.hi == 3.0 and capped.closed_hi
    sj = small_jump_window()
    assert sj.contains(0.999) and not sj.contains(1.0) and not sj.contains(0.0)
    with pytest.raises(DomainError):
        truncation_window(0.0)
    with pytest.raises(DomainError):
        large_jump_window(0.5)


# ---------------------------------------------------------------------------
# integrands
# ---------------------------------------------------------------------------

def test_as_integrand_arities():
    by_mark = as_integrand(lambda z: 2.0 * z)
    assert by_mark.mark_only and by_mark(7.0, 1.5, EMPTY_HISTORY) == 3.0
    by_tz = as_integrand(lambda t, z: t + z)
    assert not by_tz.mark_only and by_tz(1.0, 2.0, EMPTY_HISTORY) == 3.0
    full = as_integrand(lambda t, z, h: t + z + h.count_before(t))
    assert not full.mark_only and full(1.0, 2.0, EMPTY_HISTORY) == 3.0
    i = Integrand.of_mark(lambda z: z)
    assert as_integrand(i) is i
    with pytest.raises(DomainError):
        as_integrand(lambda a, b, c, d: 0.0)
    assert MARK_IDENTITY.mark_only and MARK_SQUARE(0.0, 3.0, EMPTY_HISTORY) == 9.0


# ---------------------------------------------------------------------------
# jump-side sums
# ---------------------------------------------------------------------------

EVENTS = (JumpEvent(1.0, 0.5), JumpEvent(2.0, 1.5), JumpEvent(3.0, 0.25))


def test_integrate_jump_hand_sums():
    assert integrate_jump(lambda z: z, EVENTS) == pytest.approx(2.25)
    assert integrate_jump(lambda z: z, EVENTS, through=2.0) == pytest.approx(2.0)
    assert integrate_jump(lambda z: z, EVENTS,
                          window=large_jump_window()) == pytest.approx(1.5)
    assert integrate_jump(lambda t, z: t * z, EVENTS) == pytest.approx(
        0.5 + 3.0 + 0.75)
    assert integrate_jump(lambda z: z, ()) == 0.0


def test_integrate_jump_history_is_strict_past():
    # the history handed to theta holds the jumps strictly before each time
    got = []
    integrate_jump(lambda t, z, h: got.append(h.count_before(t)) or 0.0, EVENTS)
    assert got == [0, 1, 2]


# ---------------------------------------------------------------------------
# compensator-side integrals
# ---------------------------------------------------------------------------

def test_compensator_integral_closed_forms():
    mu = cp_measure(2.0)  # rate 2, E[z] = 1/2
    h = EMPTY_HISTORY
    assert compensator_integral(lambda z: z, mu, h, 1.0) == pytest.approx(1.0)
    assert compensator_integral(lambda z: z, mu, h, 0.5) == pytest.approx(0.5)
    # restricting to |z| > 1/2 keeps 2 * int_{1/2}^1 z dz = 0.75 per unit time
    assert compensator_integral(lambda z: z, mu, h, 1.0,
                                truncation_window(2.0)) == pytest.approx(0.75)
    assert compensator_integral(lambda z: z, mu, h, 0.0) == 0.0
    assert compensator_integral(lambda z: z, mu, h, 1.0,
                                Window(1.0, 1.0, False, False)) == 0.0
    with pytest.raises(DomainError):
        compensator_integral(lambda z: z, mu, h, -1.0)


def test_compensator_integral_quadrature_agrees_with_closed_form():
    # a 3-argument integrand disables the mark-only factorization and forces
    # segment quadrature; results must agree on a history with events
    mu = cp_measure(2.0)
    h = PathHistory((JumpEvent(0.3, 0.7), JumpEvent(0.9, 0.2)))
    closed = compensator_integral(lambda z: z, mu, h, 1.5)
    quad = compensator_integral(lambda t, z, hh: z, mu, h, 1.5, quad_step=1e-3)
    assert quad == pytest.approx(closed, abs=1e-8)
    assert closed == pytest.approx(1.5)


def test_compensator_integral_time_dependent_rate():
    # rate t, mark law U(0,1]: integral of t * E[z] = T^2 / 4
    mu = DensityFormMeasure(DeterministicRate(lambda t: t), UniformMarks(0.0, 1.0))
    got = compensator_integral(lambda z: z, mu, EMPTY_HISTORY, 2.0)
    assert got == pytest.approx(1.0, rel=1e-6)


def test_compensator_integral_atoms():
    mu = DiscreteAtomsMeasure([(0.5, HomogeneousRate(1.0)),
                               (2.0, HomogeneousRate(0.5))])
    h = EMPTY_HISTORY
    assert compensator_integral(lambda z: z * z, mu, h, 3.0) == pytest.approx(
        3.0 * (0.25 * 1.0 + 4.0 * 0.5))
    assert compensator_integral(lambda z: z * z, mu, h, 3.0,
                                large_jump_window()) == pytest.approx(6.0)


def test_isometry_variance_frozen_values():
    assert isometry_variance(lambda z: z, cp_measure(2.0), 1.0) == pytest.approx(
        2.0 / 3.0, abs=1e-12)
    mu = sqrt_decay_measure(2.0)
    # E[z^2] under z^{-1/2}/2 on (0,1] is 1/5
    assert isometry_variance(lambda z: z, mu, 1.0) == pytest.approx(0.4, abs=1e-9)
    assert isometry_variance(lambda z: z, mu, 1.0,
                             truncation_window(2.0)) == pytest.approx(
        0.4 * (1.0 - 0.5 ** 2.5), abs=1e-9)
    # unavailable: time-dependent integrand or dynamic measure
    assert isometry_variance(lambda t, z: z, cp_measure(), 1.0) is None
    dyn = DensityFormMeasure(DeterministicRate(lambda t: 1.0 + t),
                             UniformMarks(0.0, 1.0))
    assert isometry_variance(lambda z: z, dyn, 1.0) is None
    assert isometry_variance(lambda z: z, cp_measure(), 1.0,
                             Window(1.0, 1.0, False, False)) == 0.0


def test_integrate_compensated_is_centered():
    mu = cp_measure(2.0)
    n = 3000
    vals = np.array([
        integrate_compensated(MARK_IDENTITY, mu,
                              simulate_mesugaki(mu, 1.0, derive_stream(SEED, 20, i)).events,
                              1.0)
        for i in range(n)])
    target_var = isometry_variance(MARK_IDENTITY, mu, 1.0)
    z = vals.mean() / math.sqrt(target_var / n)
    assert abs(z) < 4.0, f"martingale mean z={z}"
    assert vals.var(ddof=1) == pytest.approx(target_var, rel=0.15)


def test_compensated_path_sup_hand_case():
    # one jump of 0.8 at t=0.5 under drift rate 1: the running value falls
    # to -0.5 just before the jump, ends at -0.2; the sup is 0.5
    mu = cp_measure(2.0)
    h = PathHistory((JumpEvent(0.5, 0.8),))
    sup = _compensated_path_sup(MARK_IDENTITY, mu, h, 1.0, None, 1e-2)
    assert sup == pytest.approx(0.5, abs=1e-12)
    term = integrate_compensated(MARK_IDENTITY, mu, h, 1.0)
    assert sup >= abs(term) - 1e-12 and term == pytest.approx(-0.2)


# ---------------------------------------------------------------------------
# truncation sweep
# ---------------------------------------------------------------------------

def test_truncation_sweep_report():
    mu = sqrt_decay_measure(2.0)
    rep = truncation_sweep(mu, 1.0, (2.0, 4.0), 200, derive_stream(SEED, 21))
    assert rep.levels == (2.0, 4.0) and rep.n_paths == 200
    assert len(rep.per_level) == 2 and len(rep.pairs) == 1

    iso2 = 0.4 * (1.0 - 0.5 ** 2.5)
    iso4 = 0.4 * (1.0 - 0.25 ** 2.5)
    assert rep.per_level[0].isometry == pytest.approx(iso2, abs=1e-9)
    assert rep.per_level[1].isometry == pytest.approx(iso4, abs=1e-9)
    for lv in rep.per_level:
        # terminal means vanish and variances track the isometry
        assert abs(lv.mean_terminal) < 4.0 * math.sqrt(lv.isometry / 200)
        assert lv.variance == pytest.approx(lv.isometry, rel=0.5)

    pair = rep.pairs[0]
    shell = 0.4 * (0.5 ** 2.5 - 0.25 ** 2.5)
    assert pair.shell_isometry == pytest.approx(shell, abs=1e-9)
    assert pair.mean_square_gap == pytest.approx(shell,
                                                 abs=5.0 * pair.standard_error)
    assert 0.0 <= pair.mean_sup_distance <= pair.max_sup_distance


def test_truncation_sweep_validation():
    mu = sqrt_decay_measure()
    with pytest.raises(DomainError):
        truncation_sweep(mu, 1.0, (2.0,), 10, derive_stream(SEED, 22))
    with pytest.raises(DomainError):
        truncation_sweep(mu, 1.0, (4.0, 2.0), 10, derive_stream(SEED, 22))
    with pytest.raises(DomainError):
        truncation_sweep(mu, 1.0, (2.0, 4.0), 1, derive_stream(SEED, 22))


def test_sweep_report_json_round_trip():
    mu = sqrt_decay_measure(2.0)
    rep = truncation_sweep(mu, 1.0, (2.0, 4.0), 20, derive_stream(SEED, 23))
    blob = json.loads(json.dumps(rep.to_json_dict()))
    assert blob["levels"] == [2.0, 4.0] and blob["n_paths"] == 20
    assert len(blob["per_level"]) == 2 and len(blob["pairs"]) == 1
    assert blob["pairs"][0]["levels"] == [2.0, 4.0]
    assert set(blob["pairs"][0]) == {"levels", "mean_square_gap",
                                     "standard_error", "shell_isometry",
                                     "mean_sup_distance", "max_sup_distance"}
