"""Pathwise integrals against a marked point process and its compensator.

The three layers match how the objects are used downstream:

  * integrate_jump      sums an integrand over the realized jumps,
  * compensator_integral  integrates it against the conditional measure in
                          time (the predictable part),
  * integrate_compensated  their difference, a martingale when the integrand
                           is square-integrable against the measure.

Windows select marks by absolute size, so truncations near 0 and large-jump
cutoffs share one vocabulary.  The truncation sweep couples all cutoff levels
through one simulated path per replicate and reports how the compensated
integrals contract as the cutoff tightens, next to the exact second-moment
(isometry) values where the measure is static.
"""
from __future__ import annotations

import inspect
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import EMPTY_HISTORY, JumpEvent, PathHistory, RngStream, split_segments
from .errors import DomainError
from .point_process import _closed_compensator, _segment_integral
from .wakarase import (DensityFormMeasure, DiscreteAtomsMeasure, MarkInterval,
                       WakaraseMeasure)

DEFAULT_QUAD_STEP = 1e-3


# ---------------------------------------------------------------------------
# Mark windows (on |z|)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Window:
    """Set of marks selected by the size |z| lying in an interval."""

    lo: float
    hi: float = math.inf
    closed_lo: bool = False
    closed_hi: bool = False

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise DomainError("window endpoints must not be NaN")
        if not 0.0 <= self.lo <= self.hi:
            raise DomainError(f"window needs 0 <= lo <= hi, got ({self.lo}, {self.hi})")
        if self.lo == 0.0 and self.closed_lo:
            object.__setattr__(self, "closed_lo", False)
        if math.isinf(self.hi) and self.closed_hi:
            object.__setattr__(self, "closed_hi", False)

    def contains(self, z: float) -> bool:
        a = abs(z)
        if a < self.lo or a > self.hi:
            return False
        if a == self.lo and not self.closed_lo:
            return False
        if a == self.hi and not self.closed_hi:
            return False
        return True

    def regions(self) -> tuple:
        """The window as signed mark intervals."""
        if self.hi == self.lo and not (self.closed_lo and self.closed_hi):
            return ()
        out = [MarkInterval(self.lo, self.hi, self.closed_lo, self.closed_hi)]
        out.append(MarkInterval(-self.hi, -self.lo, self.closed_hi, self.closed_lo))
        return tuple(out)


def truncation_window(n: float) -> Window:
    """Marks with |z| > 1/n: what survives the level-n small-jump cutoff."""
    if n <= 0:
        raise DomainError(f"truncation level must be positive, got {n}")
    return Window(1.0 / n, math.inf, False, False)


def large_jump_window(n: Optional[float] = None) -> Window:
    """Marks with |z| >= 1, capped at |z| <= n when n is given."""
    if n is None:
        return Window(1.0, math.inf, True, False)
    if n < 1:
        raise DomainError(f"large-jump cap must be >= 1, got {n}")
    return Window(1.0, float(n), True, True)


def small_jump_window() -> Window:
    """Marks with 0 < |z| < 1 (the compensated regime)."""
    return Window(0.0, 1.0, False, False)


# ---------------------------------------------------------------------------
# Integrands
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Integrand:
    """theta(t, z, history) with a flag for mark-only integrands.

    Mark-only integrands unlock closed-form compensator factorizations, so
    prefer Integrand.of_mark where the dependence really is on z alone.
    """

    fn: Callable
    mark_only: bool = False

    def __call__(self, t: float, z: float, history: PathHistory) -> float:
        return self.fn(t, z, history)

    @staticmethod
    def of_mark(g: Callable[[float], float]) -> "Integrand":
        return Integrand(lambda t, z, history: g(z), mark_only=True)

    @staticmethod
    def of(fn: Callable) -> "Integrand":
        return Integrand(fn, mark_only=False)


MARK_IDENTITY = Integrand.of_mark(lambda z: z)
MARK_SQUARE = Integrand.of_mark(lambda z: z * z)


def as_integrand(theta) -> Integrand:
    """Wrap a callable as an Integrand by arity: z | (t, z) | (t, z, history)."""
    if isinstance(theta, Integrand):
        return theta
    n = len(inspect.signature(theta).parameters)
    if n == 1:
        return Integrand.of_mark(theta)
    if n == 2:
        return Integrand(lambda t, z, history: theta(t, z), mark_only=False)
    if n == 3:
        return Integrand(theta, mark_only=False)
    raise DomainError(f"integrand must take 1..3 arguments, got {n}")


# ---------------------------------------------------------------------------
# Jump-side integral
# ---------------------------------------------------------------------------

def integrate_jump(theta, events: Sequence[JumpEvent],
                   window: Optional[Window] = None,
                   through: Optional[float] = None) -> float:
    """Sum of theta over the jumps with marks in the window and time <= through.

    theta sees the history strictly before each jump (a view that is only
    valid during the call).
    """
    theta = as_integrand(theta)
    seen: list = []
    times: list = []
    hist = PathHistory(seen, None, 0.0, validate=False, _times=times)
    total = 0.0
    for e in events:
        if through is not None and e.time > through:
            break
        if window is None or window.contains(e.mark):
            total += theta(e.time, e.mark, hist)
        seen.append(e)
        times.append(e.time)
    return total


# ---------------------------------------------------------------------------
# Compensator-side integral
# ---------------------------------------------------------------------------

def _model_increment(model, history, a, b, quad_step):
    """Compensator increment of an intensity model over [a, b]."""
    if b <= a:
        return 0.0
    ca = _closed_compensator(model, history, a)
    cb = _closed_compensator(model, history, b)
    if ca is not None and cb is not None:
        return cb - ca
    return _segment_integral(model, history, a, b, quad_step)


def _mark_only_rate_split(theta: Integrand, mu: WakaraseMeasure, regions):
    """For mark-only theta, split the measure integral into (mark part,
    intensity model) pairs so the time integral reuses model compensators.
    Returns None when no factorization applies."""
    if not theta.mark_only:
        return None
    g = lambda z: theta(0.0, z, EMPTY_HISTORY)
    if isinstance(mu, DensityFormMeasure) and mu.mark_law.is_static:
        if regions is None:
            part = mu.mark_law.expectation_of(g)
        else:
            part = sum(mu.mark_law.expectation_of(g, r) for r in regions)
        return [(part, mu.rate_model)]
    if isinstance(mu, DiscreteAtomsMeasure):
        out = []
        for mark, model in mu.atoms:
            if regions is None or any(r.contains(mark) for r in regions):
                out.append((g(mark), model))
        return out
    return None


def compensator_integral(theta, mu: WakaraseMeasure, history: PathHistory,
                         T: float, window: Optional[Window] = None,
                         quad_step: float = DEFAULT_QUAD_STEP) -> float:
    """Time integral over [0, T] of the measure integral of theta.

    Evaluated along the realized history: segment quadrature between that
    history's event times (left endpoints as right limits), with closed forms
    when a mark-only integrand factorizes out of a static mark law.
    """
    if T < 0:
        raise DomainError(f"horizon must be >= 0, got {T}")
    if T == 0:
        return 0.0
    theta = as_integrand(theta)
    regions = window.regions() if window is not None else None
    if regions == ():
        return 0.0

    split = _mark_only_rate_split(theta, mu, regions)
    if split is not None:
        return sum(part * _model_increment(model, history, 0.0, T, quad_step)
                   for part, model in split if part != 0.0)

    breaks = [s for s in history._times if 0.0 < s < T]
    if history.driving_path is not None:
        breaks += history.driving_path.breakpoints_in(0.0, T)
    total = 0.0
    for a, b in split_segments(0.0, T, breaks):
        n = max(1, int(math.ceil((b - a) / quad_step - 1e-12)))
        xs = np.linspace(a, b, n + 1)
        ys = np.empty(n + 1)
        ys[0] = mu.integrate_marks(lambda z: theta(a, z, history), regions,
                                   a, history, right_limit=True)
        for i in range(1, n + 1):
            ys[i] = mu.integrate_marks(lambda z, _t=xs[i]: theta(_t, z, history),
                                       regions, xs[i], history)
        total += float(np.trapezoid(ys, xs))
    return total


def integrate_compensated(theta, mu: WakaraseMeasure,
                          events: Sequence[JumpEvent], T: float,
                          window: Optional[Window] = None,
                          quad_step: float = DEFAULT_QUAD_STEP) -> float:
    """Jump integral minus compensator integral at the horizon."""
    theta = as_integrand(theta)
    history = events if isinstance(events, PathHistory) else PathHistory(tuple(events))
    jump = integrate_jump(theta, history.events, window, through=T)
    comp = compensator_integral(theta, mu, history, T, window, quad_step)
    return jump - comp


def isometry_variance(theta, mu: WakaraseMeasure, T: float,
                      window: Optional[Window] = None) -> Optional[float]:
    """Exact variance T * integral of theta^2 dmu of the compensated integral.

    Available for static measures and mark-only integrands; None otherwise.
    """
    theta = as_integrand(theta)
    if not (mu.is_static and theta.mark_only):
        return None
    regions = window.regions() if window is not None else None
    if regions == ():
        return 0.0
    g2 = lambda z: theta(0.0, z, EMPTY_HISTORY) ** 2
    return T * mu.integrate_marks(g2, regions)


# ---------------------------------------------------------------------------
# Truncation sweep
# ---------------------------------------------------------------------------

def _compensated_path_sup(theta: Integrand, mu, history, T, window, quad_step):
    """Sup over [0, T] of |compensated integral| restricted to the window.

    The supremum is taken over the jump skeleton (both one-sided limits at
    every window jump) plus the horizon; exact whenever the drift keeps one
    sign between jumps, which holds for sign-definite integrands.
    """
    regions = window.regions() if window is not None else None
    split = _mark_only_rate_split(theta, mu, regions) if regions != () else []

    def drift_increment(a, b):
        if regions == ():
            return 0.0
        if split is not None:
            return sum(part * _model_increment(model, history, a, b, quad_step)
                       for part, model in split if part != 0.0)
        sub = 0.0
        for lo, hi in split_segments(a, b, [s for s in history._times if a < s < b]):
            n = max(1, int(math.ceil((hi - lo) / quad_step - 1e-12)))
            xs = np.linspace(lo, hi, n + 1)
            ys = np.empty(n + 1)
            ys[0] = mu.integrate_marks(lambda z: theta(lo, z, history), regions,
                                       lo, history, right_limit=True)
            for i in range(1, n + 1):
                ys[i] = mu.integrate_marks(
                    lambda z, _t=xs[i]: theta(_t, z, history), regions,
                    xs[i], history)
            sub += float(np.trapezoid(ys, xs))
        return sub

    sup = 0.0
    running = 0.0
    prev = 0.0
    for i, e in enumerate(history.events):
        if e.time > T:
            break
        if window is not None and not window.contains(e.mark):
            continue
        running -= drift_increment(prev, e.time)
        sup = max(sup, abs(running))
        running += theta(e.time, e.mark, history.before(e.time))
        sup = max(sup, abs(running))
        prev = e.time
    running -= drift_increment(prev, T)
    return max(sup, abs(running))


@dataclass(frozen=True)
class SweepLevel:
    level: float
    mean_terminal: float
    variance: float
    isometry: Optional[float]


@dataclass(frozen=True)
class SweepPair:
    level_coarse: float
    level_fine: float
    mean_square_gap: float
    standard_error: float
    shell_isometry: Optional[float]
    mean_sup_distance: float
    max_sup_distance: float


@dataclass(frozen=True)
class SweepReport:
    horizon: float
    levels: tuple
    n_paths: int
    per_level: tuple
    pairs: tuple

    def to_json_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "levels": list(self.levels),
            "n_paths": self.n_paths,
            "per_level": [{
                "level": s.level,
                "mean_terminal": s.mean_terminal,
                "variance": s.variance,
                "isometry": s.isometry,
            } for s in self.per_level],
            "pairs": [{
                "levels": [p.level_coarse, p.level_fine],
                "mean_square_gap": p.mean_square_gap,
                "standard_error": p.standard_error,
                "shell_isometry": p.shell_isometry,
                "mean_sup_distance": p.mean_sup_distance,
                "max_sup_distance": p.max_sup_distance,
            } for p in self.pairs],
        }


def truncation_sweep(mu: WakaraseMeasure, T: float, levels: Sequence[float],
                     n_paths: int, rng: RngStream, theta=MARK_IDENTITY,
                     quad_step: float = DEFAULT_QUAD_STEP) -> SweepReport:
    """Couple all truncation levels through shared paths and measure how the
    compensated integrals contract as the cutoff tightens.

    For consecutive levels n < m the gap process is the compensated integral
    over the shell 1/m < |z| <= 1/n; its terminal second moment is compared
    with the exact isometry value where one exists.
    """
    levels = tuple(float(n) for n in levels)
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise DomainError("levels must be at least two, strictly increasing")
    if n_paths < 2:
        raise DomainError(f"need at least 2 paths, got {n_paths}")
    theta = as_integrand(theta)

    from .construction import simulate_mesugaki

    shells = [Window(1.0 / m, 1.0 / n, False, True)
              for n, m in zip(levels, levels[1:])]
    windows = [truncation_window(n) for n in levels]

    terminals = np.zeros((n_paths, len(levels)))
    shell_gaps = np.zeros((n_paths, len(shells)))
    shell_sups = np.zeros((n_paths, len(shells)))

    for i in range(n_paths):
        path = simulate_mesugaki(mu, T, rng.substream(i))
        history = PathHistory(path.events, validate=False)
        for k, win in enumerate(windows):
            terminals[i, k] = integrate_compensated(theta, mu, history, T,
                                                    win, quad_step)
        for k, shell in enumerate(shells):
            shell_gaps[i, k] = integrate_compensated(theta, mu, history, T,
                                                     shell, quad_step)
            shell_sups[i, k] = _compensated_path_sup(theta, mu, history, T,
                                                     shell, quad_step)

    per_level = tuple(
        SweepLevel(levels[k],
                   float(terminals[:, k].mean()),
                   float(terminals[:, k].var(ddof=1)),
                   isometry_variance(theta, mu, T, windows[k]))
        for k in range(len(levels)))

    sqrt_n = math.sqrt(n_paths)
    pairs = []
    for k, shell in enumerate(shells):
        sq = shell_gaps[:, k] ** 2
        pairs.append(SweepPair(
            levels[k], levels[k + 1],
            float(sq.mean()),
            float(sq.std(ddof=1) / sqrt_n),
            isometry_variance(theta, mu, T, shell),
            float(shell_sups[:, k].mean()),
            float(shell_sups[:, k].max())))

    return SweepReport(float(T), levels, n_paths, per_level, tuple(pairs))
