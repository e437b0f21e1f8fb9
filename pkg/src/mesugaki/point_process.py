"""Path-dependent intensity models and the thinning simulator.

All counting-process simulation in the package goes through one algorithm:
thinning against a local dominating rate (inversion exists only as a test
oracle).  The predictability contract is enforced throughout: the intensity
at time t is a function of events strictly before t, while dominating rates
at a window start t account for events at t as well, since every candidate
inside the window sees them in its own left limit.
"""
from __future__ import annotations

import bisect
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import JumpEvent, PathHistory, RngStream, split_segments
from .errors import (ContractViolationError, DomainError, RunawayProcessError,
                     UnsupportedModelError)

DEFAULT_EVENT_CAP = 10_000_000
KERNEL_FLOOR = 1e-12
# relative slack before a thinning acceptance check counts as a violated bound
_BOUND_SLACK = 1e-9
# Relative safety bump applied to sampled window suprema.  A grid of
# _WINDOW_SAMPLES points undershoots a smooth interior peak by about
# (w / _WINDOW_SAMPLES)^2 * |f''| / 8, so the bump must cover the curvature
# term; 1e-3 does for |f''| up to ~500 f over a unit window.  Inflating the
# bound never biases thinning, and a genuinely exceeded bound still raises.
_SUP_BUMP = 1e-3
_WINDOW_SAMPLES = 256


# ---------------------------------------------------------------------------
# Excitation kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpKernel:
    """excitation * exp(-decay * u); closed forms for mass and horizon."""

    excitation: float
    decay: float

    def __post_init__(self):
        if self.excitation < 0 or self.decay <= 0:
            raise DomainError("ExpKernel needs excitation >= 0 and decay > 0")

    def __call__(self, u: float) -> float:
        return self.excitation * math.exp(-self.decay * u)

    @property
    def total_mass(self) -> float:
        return self.excitation / self.decay

    @property
    def horizon(self) -> float:
        if self.excitation <= KERNEL_FLOOR:
            return 0.0
        return math.log(self.excitation / KERNEL_FLOOR) / self.decay


class GenericKernel:
    """A nonnegative decreasing kernel given as a plain callable.

    Contributions beyond the horizon where the kernel has decayed under
    1e-12 are treated as zero.  total_mass may be declared; otherwise it is
    estimated once by dense trapezoid quadrature over [0, horizon].
    """

    def __init__(self, fn: Callable[[float], float],
                 total_mass: Optional[float] = None,
                 horizon: Optional[float] = None):
        self.fn = fn
        if horizon is None:
            horizon = self._find_horizon(fn)
        self.horizon = float(horizon)
        if total_mass is None:
            total_mass = self._estimate_mass(fn, self.horizon)
        self.total_mass = float(total_mass)

    @staticmethod
    def _find_horizon(fn) -> float:
        u = 1.0
        for _ in range(80):
            if fn(u) < KERNEL_FLOOR:
                return u
            u *= 2.0
        return math.inf

    @staticmethod
    def _estimate_mass(fn, horizon: float) -> float:
        if not math.isfinite(horizon):
            raise UnsupportedModelError(
                "declare total_mass for kernels without a finite decay horizon")
        xs = np.linspace(0.0, horizon, 1 << 16)
        return float(np.trapezoid([fn(x) for x in xs], xs))

    def __call__(self, u: float) -> float:
        return self.fn(u) if u <= self.horizon else 0.0


# ---------------------------------------------------------------------------
# Intensity models
# ---------------------------------------------------------------------------

class IntensityModel(ABC):
    """Conditional jump rate lambda(t | F_t) of a counting process."""

    #: True when a dominating rate at the window start is valid for any
    #: lookahead (constant or event-decreasing intensities).
    window_free = False

    @abstractmethod
    def rate(self, t: float, history: PathHistory) -> float:
        """Intensity at t given events strictly before t."""

    def rate_right(self, t: float, history: PathHistory) -> float:
        """Right limit at t: events with time <= t contribute.

        Evaluating the rule one ulp after t makes its own strict-past read
        pick up an event sitting exactly at t; models with closed forms
        override this.
        """
        return self.rate(math.nextafter(t, math.inf), history)

    @abstractmethod
    def dominating(self, t: float, history: PathHistory, lookahead: float) -> float:
        """Upper bound for the intensity on [t, t + lookahead), no new events."""

    @abstractmethod
    def scaled(self, c: float) -> "IntensityModel":
        """The model whose intensity is c times this one's (0 <= c)."""


@dataclass(frozen=True)
class HomogeneousRate(IntensityModel):
    value: float
    window_free = True

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise DomainError(f"constant rate must be finite nonnegative, got {self.value}")

    def rate(self, t, history):
        return self.value

    def dominating(self, t, history, lookahead):
        return self.value

    def scaled(self, c):
        return HomogeneousRate(c * self.value)


@dataclass(frozen=True)
class DeterministicRate(IntensityModel):
    """lambda(t) given as a nonnegative function of time alone."""

    fn: Callable[[float], float]

    def rate(self, t, history):
        v = float(self.fn(t))
        if v < 0:
            raise ContractViolationError(f"deterministic intensity negative at t={t}: {v}")
        return v

    def dominating(self, t, history, lookahead):
        return _sampled_sup(lambda s: float(self.fn(s)), t, t + lookahead, ())

    def scaled(self, c):
        base = self.fn
        return DeterministicRate(lambda t: c * base(t))


@dataclass(frozen=True)
class CoxRate(IntensityModel):
    """phi(X_t) for a driving path X; phi must be nonnegative.

    The driving path may be attached to the model or carried by the history;
    the model's own reference wins when both are present.
    """

    phi: Callable[[float], float]
    driving: Optional[object] = None

    def _path(self, history):
        path = self.driving if self.driving is not None else history.driving_path
        if path is None:
            raise DomainError("Cox intensity needs a driving path (model or history)")
        return path

    def rate(self, t, history):
        v = float(self.phi(self._path(history).value_at(t)))
        if v < 0:
            raise ContractViolationError(f"Cox intensity negative at t={t}: {v}")
        return v

    def dominating(self, t, history, lookahead):
        path = self._path(history)
        extra = path.breakpoints_in(t, t + lookahead)
        return _sampled_sup(lambda s: float(self.phi(path.value_at(s))),
                            t, t + lookahead, extra)

    def scaled(self, c):
        base = self.phi
        return CoxRate(lambda x: c * base(x), self.driving)


@dataclass(frozen=True)
class HawkesRate(IntensityModel):
    """base + sum of kernel(t - s) over past event times s."""

    base: float
    kernel: object  # ExpKernel | GenericKernel
    window_free = True

    def __post_init__(self):
        if not (self.base >= 0 and math.isfinite(self.base)):
            raise DomainError(f"Hawkes base rate must be finite nonnegative, got {self.base}")

    @property
    def branching_ratio(self) -> float:
        return self.kernel.total_mass

    def _excitation(self, t: float, history: PathHistory, include_t: bool) -> float:
        times = history._times
        hi = bisect.bisect_right(times, t) if include_t else bisect.bisect_left(times, t)
        horizon = getattr(self.kernel, "horizon", math.inf)
        lo = bisect.bisect_left(times, t - horizon) if math.isfinite(horizon) else 0
        k = self.kernel
        return sum(k(t - times[i]) for i in range(lo, hi))

    def rate(self, t, history):
        return self.base + self._excitation(t, history, include_t=False)

    def rate_right(self, t, history):
        return self.base + self._excitation(t, history, include_t=True)

    def dominating(self, t, history, lookahead):
        # valid for any lookahead because the kernel is decreasing
        return self.rate_right(t, history)

    def scaled(self, c):
        k = self.kernel
        if isinstance(k, ExpKernel):
            scaled_kernel = ExpKernel(c * k.excitation, k.decay)
        else:
            fn = k.fn
            scaled_kernel = GenericKernel(lambda u: c * fn(u),
                                          total_mass=c * k.total_mass,
                                          horizon=k.horizon)
        return HawkesRate(c * self.base, scaled_kernel)


@dataclass(frozen=True)
class CustomRate(IntensityModel):
    """User rule lambda(t, history) with a declared local upper bound.

    bound(t, history, lookahead) must dominate the rule on [t, t + lookahead)
    given no new events; thinning verifies this at every candidate and raises
    on violation.
    """

    rule: Callable[[float, PathHistory], float]
    bound: Optional[Callable[[float, PathHistory, float], float]] = None

    def rate(self, t, history):
        v = float(self.rule(t, history))
        if v < 0:
            raise ContractViolationError(f"custom intensity negative at t={t}: {v}")
        return v

    def dominating(self, t, history, lookahead):
        if self.bound is None:
            raise UnsupportedModelError(
                "custom intensity has no declared local bound; simulation unsupported")
        return float(self.bound(t, history, lookahead))

    def scaled(self, c):
        rule, bound = self.rule, self.bound
        scaled_bound = None if bound is None else (
            lambda t, h, la: c * bound(t, h, la))
        return CustomRate(lambda t, h: c * rule(t, h), scaled_bound)


class SumRate(IntensityModel):
    """Superposition of component intensities over a shared history."""

    def __init__(self, components: Sequence[IntensityModel]):
        self.components = tuple(components)
        self.window_free = all(m.window_free for m in self.components)

    def rate(self, t, history):
        return sum(m.rate(t, history) for m in self.components)

    def rate_right(self, t, history):
        return sum(m.rate_right(t, history) for m in self.components)

    def dominating(self, t, history, lookahead):
        return sum(m.dominating(t, history, lookahead) for m in self.components)

    def scaled(self, c):
        return SumRate([m.scaled(c) for m in self.components])

    def __repr__(self):
        return f"SumRate({list(self.components)!r})"


def _sampled_sup(fn, a: float, b: float, extra: Sequence[float]) -> float:
    xs = np.linspace(a, b, _WINDOW_SAMPLES + 1)
    m = max(fn(x) for x in xs)
    for p in extra:
        if a < p < b:
            m = max(m, fn(p), fn(min(b, p + 1e-12 * max(1.0, abs(p)))))
    if m < 0:
        raise ContractViolationError("intensity negative inside dominating window")
    return m * (1.0 + _SUP_BUMP)


# ---------------------------------------------------------------------------
# Contract operations
# ---------------------------------------------------------------------------

def intensity_at(model: IntensityModel, t: float, history: PathHistory) -> float:
    """lambda(t | F_t); uses events of the history strictly before t."""
    if t < history.origin:
        raise DomainError(f"evaluation time {t} precedes history origin {history.origin}")
    return model.rate(t, history)


def dominating_rate(model: IntensityModel, t: float, history: PathHistory,
                    lookahead: float) -> float:
    """Bound for the intensity on [t, t + lookahead) given no new events."""
    if lookahead <= 0:
        raise DomainError(f"lookahead must be positive, got {lookahead}")
    if t < history.origin:
        raise DomainError(f"window start {t} precedes history origin {history.origin}")
    return model.dominating(t, history, lookahead)


def _validate_horizon(T: float) -> float:
    if not (T > 0 and math.isfinite(T)):
        raise DomainError(f"horizon must be positive finite, got {T}")
    return float(T)


def _check_stability(model: IntensityModel):
    if isinstance(model, HawkesRate):
        r = model.branching_ratio
        if not r < 1.0:
            raise DomainError(f"Hawkes kernel mass {r} >= 1: unstable, refusing to simulate")
    elif isinstance(model, SumRate):
        for m in model.components:
            _check_stability(m)


def _simulate_thinning(model: IntensityModel, T: float, rng: RngStream,
                       draw_mark=None, cap: int = DEFAULT_EVENT_CAP,
                       lookahead: float = 1.0) -> list:
    """Shared thinning engine. draw_mark(t, history, rng) -> mark, or None
    for unit marks.  Returns the accepted events in time order."""
    T = _validate_horizon(T)
    _check_stability(model)

    if isinstance(model, HomogeneousRate) and draw_mark is None:
        return _sim_homogeneous(model.value, T, rng, cap)
    if isinstance(model, HawkesRate) and isinstance(model.kernel, ExpKernel):
        return _sim_exp_hawkes(model, T, rng, draw_mark, cap)
    return _sim_windowed(model, T, rng, draw_mark, cap, lookahead)


def _sim_homogeneous(lam: float, T: float, rng: RngStream, cap: int) -> list:
    events = []
    if lam <= 0:
        return events
    t = 0.0
    scale = 1.0 / lam
    while True:
        t += rng.exponential(scale)
        if t > T:
            return events
        if events and t == events[-1].time:
            continue
        events.append(JumpEvent(t, 1.0))
        if len(events) > cap:
            raise RunawayProcessError(f"event cap {cap} exceeded at t={t}")


def _sim_exp_hawkes(model: HawkesRate, T: float, rng: RngStream,
                    draw_mark, cap: int) -> list:
    """O(1) recursive intensity update between candidates."""
    base = model.base
    alpha = model.kernel.excitation
    beta = model.kernel.decay
    events: list = []
    times: list = []
    hist = PathHistory(events, None, 0.0, validate=False, _times=times)
    t = 0.0
    excess = 0.0  # intensity right limit minus base
    while True:
        bound = base + excess
        if bound <= 0.0:
            return events
        w = rng.exponential(1.0 / bound)
        t_new = t + w
        if t_new > T:
            return events
        excess *= math.exp(-beta * w)
        t = t_new
        if times and t == times[-1]:
            continue
        if rng.uniform() * bound <= base + excess:
            mark = 1.0 if draw_mark is None else draw_mark(t, hist, rng)
            events.append(JumpEvent(t, mark))
            times.append(t)
            if len(events) > cap:
                raise RunawayProcessError(f"event cap {cap} exceeded at t={t}")
            excess += alpha


def _sim_windowed(model: IntensityModel, T: float, rng: RngStream,
                  draw_mark, cap: int, lookahead: float) -> list:
    events: list = []
    times: list = []
    hist = PathHistory(events, _model_driving(model), 0.0,
                       validate=False, _times=times)
    t = 0.0
    while t < T:
        window = T - t if model.window_free else min(lookahead, T - t)
        bound = model.dominating(t, hist, window)
        if bound <= 0.0:
            t += window
            continue
        w = rng.exponential(1.0 / bound)
        if w >= window:
            t += window
            continue
        tau = t + w
        if times and tau == times[-1]:
            t = tau
            continue
        lam = model.rate(tau, hist)
        if lam > bound * (1.0 + _BOUND_SLACK) + 1e-300:
            raise ContractViolationError(
                f"dominating rate {bound} exceeded by intensity {lam} at t={tau}")
        if rng.uniform() * bound <= lam:
            mark = 1.0 if draw_mark is None else draw_mark(tau, hist, rng)
            events.append(JumpEvent(tau, mark))
            times.append(tau)
            if len(events) > cap:
                raise RunawayProcessError(f"event cap {cap} exceeded at t={tau}")
        t = tau
    return events


def _model_driving(model):
    if isinstance(model, CoxRate):
        return model.driving
    if isinstance(model, SumRate):
        for m in model.components:
            d = _model_driving(m)
            if d is not None:
                return d
    return None


def simulate_counting(model: IntensityModel, T: float, rng: RngStream,
                      cap: int = DEFAULT_EVENT_CAP,
                      lookahead: float = 1.0) -> tuple:
    """Simulate the counting process on [0, T] by thinning.

    Returns the accepted events as a tuple of JumpEvent with unit marks.
    """
    return tuple(_simulate_thinning(model, T, rng, None, cap, lookahead))


# ---------------------------------------------------------------------------
# Compensators
# ---------------------------------------------------------------------------

def _closed_compensator(model, history, t):
    """Closed form where one exists, else None."""
    if isinstance(model, HomogeneousRate):
        return model.value * t
    if isinstance(model, HawkesRate) and isinstance(model.kernel, ExpKernel):
        alpha = model.kernel.excitation
        beta = model.kernel.decay
        acc = model.base * t
        ratio = alpha / beta
        for s in history._times:
            if s >= t:
                break
            acc += ratio * (1.0 - math.exp(-beta * (t - s)))
        return acc
    if isinstance(model, SumRate):
        parts = [_closed_compensator(m, history, t) for m in model.components]
        if all(p is not None for p in parts):
            return sum(parts)
    return None


def compensator(model: IntensityModel, history: PathHistory, t: float,
                quad_step: float = 1e-3) -> float:
    """Integral of the realized intensity over [0, t] along the history.

    Closed form for constant and exponential-kernel self-exciting rates;
    composite trapezoid between jump times otherwise, with the integrand at a
    segment's left endpoint taken as the right limit so each segment sees a
    constant event set.
    """
    if t < 0:
        raise DomainError(f"compensator horizon must be >= 0, got {t}")
    if t == 0:
        return 0.0
    closed = _closed_compensator(model, history, t)
    if closed is not None:
        return closed
    if quad_step <= 0:
        raise DomainError("quad_step must be positive")

    breaks = [s for s in history._times if 0.0 < s < t]
    if history.driving_path is not None:
        breaks += history.driving_path.breakpoints_in(0.0, t)
    total = 0.0
    for a, b in split_segments(0.0, t, breaks):
        n = max(1, int(math.ceil((b - a) / quad_step - 1e-12)))
        xs = np.linspace(a, b, n + 1)
        ys = np.empty(n + 1)
        ys[0] = model.rate_right(a, history)
        for i in range(1, n + 1):
            ys[i] = model.rate(xs[i], history)
        total += float(np.trapezoid(ys, xs))
    return total


def compensator_at_times(model: IntensityModel, history: PathHistory,
                         times: Sequence[float],
                         quad_step: float = 1e-3) -> np.ndarray:
    """Compensator evaluated at an ascending sequence of times."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.zeros(0)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise DomainError("times must be ascending and nonnegative")

    if isinstance(model, HomogeneousRate):
        return model.value * times

    if isinstance(model, HawkesRate) and isinstance(model.kernel, ExpKernel):
        alpha = model.kernel.excitation
        beta = model.kernel.decay
        ratio = alpha / beta
        ev = history._times
        out = np.empty(times.size)
        acc = 0.0
        prev = 0.0
        excess = 0.0  # right-limit excitation at prev
        j = 0
        for i, t in enumerate(times):
            while j < len(ev) and ev[j] < t:
                dt = ev[j] - prev
                acc += model.base * dt + (excess / beta) * (1.0 - math.exp(-beta * dt))
                excess = excess * math.exp(-beta * dt) + alpha
                prev = ev[j]
                j += 1
            dt = t - prev
            acc_t = acc + model.base * dt + (excess / beta) * (1.0 - math.exp(-beta * dt))
            out[i] = acc_t
            # keep (prev, acc, excess) anchored at the last event before t
        return out

    out = np.empty(times.size)
    prev_t = 0.0
    acc = 0.0
    for i, t in enumerate(times):
        if t < prev_t:
            raise DomainError("times must be ascending")
        acc += _segment_integral(model, history, prev_t, t, quad_step)
        out[i] = acc
        prev_t = t
    return out


def _segment_integral(model, history, a, b, quad_step):
    if b <= a:
        return 0.0
    breaks = [s for s in history._times if a < s < b]
    if history.driving_path is not None:
        breaks += history.driving_path.breakpoints_in(a, b)
    total = 0.0
    for lo, hi in split_segments(a, b, breaks):
        n = max(1, int(math.ceil((hi - lo) / quad_step - 1e-12)))
        xs = np.linspace(lo, hi, n + 1)
        ys = np.empty(n + 1)
        ys[0] = model.rate_right(lo, history)
        for i in range(1, n + 1):
            ys[i] = model.rate(xs[i], history)
        total += float(np.trapezoid(ys, xs))
    return total
