"""Conditional jump-rate measures over the mark space and their grids.

A Wakarase measure assigns to each mark set A a nonnegative rate
mu(A | t, history): the conditional arrival intensity of jumps with marks in
A.  Two concrete shapes are supported: finitely many atoms, each carrying its
own intensity model over the shared history, and a density form that factors
into a total-rate model times a conditional mark law.

Grids refine dyadically toward 0 and arithmetically toward infinity; the
discretization of a measure on a grid assigns each grid point the mass of the
half-open cell it starts, with the last cell extending to infinity and the
mass below the smallest grid point dropped (and reported, never
redistributed).
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (EMPTY_HISTORY, PathHistory, RngStream, adaptive_simpson,
                   split_segments)
from .errors import (ContractViolationError, DomainError, IntegrabilityError,
                     UnsupportedModelError)
from .point_process import (HomogeneousRate, IntensityModel, SumRate,
                            _simulate_thinning, intensity_at)

SIMPSON_TOL = 1e-10


# ---------------------------------------------------------------------------
# Mark intervals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkInterval:
    """An interval of marks. Defaults to the half-open cell convention [lo, hi).

    Intervals may not straddle 0 or include it as a closed endpoint: the mark
    space is the reals without 0.  Use two intervals for two-sided sets.
    """

    lo: float
    hi: float
    closed_lo: bool = True
    closed_hi: bool = False

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise DomainError("interval endpoints must not be NaN")
        if self.hi < self.lo:
            raise DomainError(f"interval endpoints out of order: ({self.lo}, {self.hi})")
        if self.lo < 0.0 < self.hi:
            raise DomainError("interval straddles 0; split it into signed parts")
        if (self.lo == 0.0 and self.closed_lo) or (self.hi == 0.0 and self.closed_hi):
            raise DomainError("0 is not a mark; use an open endpoint at 0")

    def contains(self, z: float) -> bool:
        if z < self.lo or z > self.hi:
            return False
        if z == self.lo and not self.closed_lo:
            return False
        if z == self.hi and not self.closed_hi:
            return False
        return True

    def is_empty(self) -> bool:
        return self.hi == self.lo and not (self.closed_lo and self.closed_hi)

    def clipped(self, lo: float, hi: float) -> "MarkInterval | None":
        """Intersection with [lo, hi]; None when empty."""
        a, ca = (self.lo, self.closed_lo) if self.lo >= lo else (lo, True)
        b, cb = (self.hi, self.closed_hi) if self.hi <= hi else (hi, True)
        if b < a or (a == b and not (ca and cb)):
            return None
        if a == 0.0:
            ca = False
        if b == 0.0:
            cb = False
        if b < a or (a == b and not (ca and cb)):
            return None
        return MarkInterval(a, b, ca, cb)


def cell(lo: float, hi: float) -> MarkInterval:
    return MarkInterval(lo, hi, True, False)


def closed_interval(lo: float, hi: float) -> MarkInterval:
    return MarkInterval(lo, hi, True, True)


def open_interval(lo: float, hi: float) -> MarkInterval:
    return MarkInterval(lo, hi, False, False)


def _as_regions(region) -> Optional[tuple]:
    """Normalize a region argument to a tuple of MarkInterval, or None for all."""
    if region is None:
        return None
    if isinstance(region, MarkInterval):
        return (region,)
    regions = tuple(region)
    for r in regions:
        if not isinstance(r, MarkInterval):
            raise DomainError(f"region components must be MarkInterval, got {r!r}")
    return regions


# ---------------------------------------------------------------------------
# Mark laws
# ---------------------------------------------------------------------------

class MarkLaw:
    """Conditional distribution of the mark given an event at (t, history).

    Built-in laws are static (independent of t and history); conditional laws
    override is_static and thread the conditioning arguments through.
    """

    support: tuple = (-math.inf, math.inf)
    is_static: bool = True

    def sample(self, rng: RngStream, t: float = 0.0,
               history: PathHistory = EMPTY_HISTORY) -> float:
        raise NotImplementedError

    def density(self, z: float, t: float = 0.0,
                history: PathHistory = EMPTY_HISTORY) -> float:
        raise NotImplementedError

    def interval_mass(self, interval: MarkInterval, t: float = 0.0,
                      history: PathHistory = EMPTY_HISTORY) -> float:
        """P(mark in interval). Default: adaptive Simpson on the density."""
        clipped = interval.clipped(*self.support)
        if clipped is None or clipped.is_empty():
            return 0.0
        return adaptive_simpson(lambda z: self.density(z, t, history),
                                clipped.lo, clipped.hi, SIMPSON_TOL)

    def expectation_of(self, fn: Callable[[float], float],
                       interval: Optional[MarkInterval] = None, t: float = 0.0,
                       history: PathHistory = EMPTY_HISTORY) -> float:
        """Integral of fn against the law over interval (default: support)."""
        lo, hi = self.support
        if interval is not None:
            clipped = interval.clipped(lo, hi)
            if clipped is None or clipped.is_empty():
                return 0.0
            lo, hi = clipped.lo, clipped.hi
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise IntegrabilityError("unbounded mark quadrature not supported; "
                                     "restrict the interval")
        return adaptive_simpson(lambda z: fn(z) * self.density(z, t, history),
                                lo, hi, SIMPSON_TOL)


class UniformMarks(MarkLaw):
    """Uniform mark on (lo, hi]."""

    def __init__(self, lo: float, hi: float):
        if not (hi > lo and math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError(f"uniform mark law needs finite lo < hi, got ({lo}, {hi})")
        if lo < 0.0 < hi:
            raise DomainError("mark support must not straddle 0")
        self.lo = float(lo)
        self.hi = float(hi)
        self.support = (self.lo, self.hi)

    def sample(self, rng, t=0.0, history=EMPTY_HISTORY):
        # hi - u * width lands in (lo, hi] for u in [0, 1)
        return self.hi - rng.uniform() * (self.hi - self.lo)

    def density(self, z, t=0.0, history=EMPTY_HISTORY):
        return 1.0 / (self.hi - self.lo) if self.lo < z <= self.hi else 0.0

    def interval_mass(self, interval, t=0.0, history=EMPTY_HISTORY):
        clipped = interval.clipped(self.lo, self.hi)
        if clipped is None:
            return 0.0
        return (clipped.hi - clipped.lo) / (self.hi - self.lo)

    def __repr__(self):
        return f"UniformMarks({self.lo}, {self.hi}]"


class PointMass(MarkLaw):
    """Degenerate mark law: every jump carries the same mark.

    sample() consumes no draws, so a marked run and a counting run with the
    same stream produce identical event times.
    """

    def __init__(self, value: float):
        if value == 0.0 or not math.isfinite(value):
            raise DomainError(f"point mass must sit at a nonzero finite mark, got {value}")
        self.value = float(value)
        self.support = (self.value, self.value)

    def sample(self, rng, t=0.0, history=EMPTY_HISTORY):
        return self.value

    def density(self, z, t=0.0, history=EMPTY_HISTORY):
        raise UnsupportedModelError("a point mass has no density; use interval_mass")

    def interval_mass(self, interval, t=0.0, history=EMPTY_HISTORY):
        return 1.0 if interval.contains(self.value) else 0.0

    def expectation_of(self, fn, interval=None, t=0.0, history=EMPTY_HISTORY):
        if interval is not None and not interval.contains(self.value):
            return 0.0
        return fn(self.value)

    def __repr__(self):
        return f"PointMass({self.value})"


class PowerLawMarks(MarkLaw):
    """Density proportional to z**exponent on (lo, hi].

    exponent > -1 is required when lo == 0 (integrability at the origin).
    """

    def __init__(self, exponent: float, lo: float, hi: float):
        if not (hi > lo >= 0.0 and math.isfinite(hi)):
            raise DomainError(f"power-law mark support must be finite 0 <= lo < hi, "
                              f"got ({lo}, {hi})")
        if lo == 0.0 and exponent <= -1.0:
            raise DomainError("exponent must exceed -1 when the support touches 0")
        self.exponent = float(exponent)
        self.lo = float(lo)
        self.hi = float(hi)
        self.support = (self.lo, self.hi)
        p = self.exponent + 1.0
        if p == 0.0:
            self._norm = math.log(self.hi / self.lo)
        else:
            self._norm = (self.hi ** p - self.lo ** p) / p

    def _cdf_piece(self, a: float, b: float) -> float:
        p = self.exponent + 1.0
        if p == 0.0:
            return math.log(b / a) / self._norm
        return (b ** p - a ** p) / (p * self._norm)

    def sample(self, rng, t=0.0, history=EMPTY_HISTORY):
        u = 1.0 - rng.uniform()  # in (0, 1]
        p = self.exponent + 1.0
        if p == 0.0:
            return self.lo * (self.hi / self.lo) ** u
        return (self.lo ** p + u * (self.hi ** p - self.lo ** p)) ** (1.0 / p)

    def density(self, z, t=0.0, history=EMPTY_HISTORY):
        if not (self.lo < z <= self.hi):
            return 0.0
        return z ** self.exponent / self._norm

    def interval_mass(self, interval, t=0.0, history=EMPTY_HISTORY):
        clipped = interval.clipped(self.lo, self.hi)
        if clipped is None or clipped.hi <= self.lo:
            return 0.0
        a = max(clipped.lo, self.lo)
        b = clipped.hi
        if b <= a:
            return 0.0
        if a == 0.0:
            p = self.exponent + 1.0
            return (b ** p) / (p * self._norm)
        return self._cdf_piece(a, b)

    def __repr__(self):
        return f"PowerLawMarks(z^{self.exponent} on ({self.lo}, {self.hi}])"


class CustomDensityMarks(MarkLaw):
    """Mark law given by a plain density callable on [lo, hi].

    interval masses fall back to adaptive Simpson; sampling inverts the mass
    function numerically unless a sampler is supplied.  The density must
    integrate to 1 over its support (checked once, tolerance 1e-6).
    """

    def __init__(self, density_fn: Callable[[float], float], lo: float, hi: float,
                 sampler: Optional[Callable[[RngStream], float]] = None):
        if not (hi > lo and math.isfinite(lo) and math.isfinite(hi)):
            raise DomainError("custom density needs a finite support lo < hi")
        if lo < 0.0 < hi:
            raise DomainError("mark support must not straddle 0")
        self._fn = density_fn
        self.lo = float(lo)
        self.hi = float(hi)
        self.support = (self.lo, self.hi)
        self._sampler = sampler
        self._checked = False

    def _check_norm(self):
        if not self._checked:
            total = adaptive_simpson(self._fn, self.lo, self.hi, SIMPSON_TOL)
            if abs(total - 1.0) > 1e-6:
                raise DomainError(f"mark density integrates to {total}, expected 1")
            self._checked = True

    def density(self, z, t=0.0, history=EMPTY_HISTORY):
        return float(self._fn(z)) if self.lo <= z <= self.hi else 0.0

    def interval_mass(self, interval, t=0.0, history=EMPTY_HISTORY):
        self._check_norm()
        return super().interval_mass(interval, t, history)

    def sample(self, rng, t=0.0, history=EMPTY_HISTORY):
        if self._sampler is not None:
            return float(self._sampler(rng))
        self._check_norm()
        u = rng.uniform()
        from scipy.optimize import brentq
        # endpoints sitting exactly at 0 must stay open (0 is not a mark)
        target = lambda x: self.interval_mass(
            MarkInterval(self.lo, x, self.lo != 0.0, x != 0.0)) - u
        return float(brentq(target, self.lo, self.hi, xtol=1e-12))


# ---------------------------------------------------------------------------
# Wakarase measures
# ---------------------------------------------------------------------------

class WakaraseMeasure:
    """Conditional rate measure on the mark space."""

    #: (lo, hi) hull of the marks this measure can produce
    support: tuple = (-math.inf, math.inf)

    def mass(self, region, t: float = 0.0, history: PathHistory = EMPTY_HISTORY,
             right_limit: bool = False) -> float:
        raise NotImplementedError

    def total_rate(self, t: float = 0.0, history: PathHistory = EMPTY_HISTORY,
                   right_limit: bool = False) -> float:
        return self.mass(None, t, history, right_limit)

    def total_model(self) -> IntensityModel:
        """Intensity model of the superposed arrival process."""
        raise NotImplementedError

    def sample_mark(self, rng: RngStream, t: float,
                    history: PathHistory) -> float:
        raise NotImplementedError

    def integrate_marks(self, fn: Callable[[float], float], region=None,
                        t: float = 0.0, history: PathHistory = EMPTY_HISTORY,
                        right_limit: bool = False) -> float:
        """Integral of fn(z) against the measure over the region."""
        raise NotImplementedError

    @property
    def is_static(self) -> bool:
        """True when the measure does not depend on (t, history)."""
        return False


class DiscreteAtomsMeasure(WakaraseMeasure):
    """Finitely many atoms (mark, intensity model) over a shared history."""

    def __init__(self, atoms: Sequence[tuple], grid: "Optional[MarkGrid]" = None):
        pairs = []
        seen = set()
        for mark, model in atoms:
            mark = float(mark)
            if mark == 0.0 or not math.isfinite(mark):
                raise DomainError(f"atom marks must be nonzero finite, got {mark}")
            if mark in seen:
                raise DomainError(f"duplicate atom mark {mark}")
            seen.add(mark)
            if not isinstance(model, IntensityModel):
                raise DomainError(f"atom rate must be an IntensityModel, got {model!r}")
            pairs.append((mark, model))
        if not pairs:
            raise DomainError("a discrete measure needs at least one atom")
        pairs.sort(key=lambda p: p[0])
        self.atoms = tuple(pairs)
        self.grid = grid
        self.support = (self.atoms[0][0], self.atoms[-1][0])

    def _rate_of(self, model, t, history, right_limit):
        return model.rate_right(t, history) if right_limit else model.rate(t, history)

    def mass(self, region, t=0.0, history=EMPTY_HISTORY, right_limit=False):
        regions = _as_regions(region)
        total = 0.0
        for mark, model in self.atoms:
            if regions is None or any(r.contains(mark) for r in regions):
                total += self._rate_of(model, t, history, right_limit)
        return total

    def atom_rates(self, t, history, right_limit=False):
        return [self._rate_of(m, t, history, right_limit) for _, m in self.atoms]

    def total_model(self):
        models = [m for _, m in self.atoms]
        return models[0] if len(models) == 1 else SumRate(models)

    def sample_mark(self, rng, t, history):
        rates = self.atom_rates(t, history)
        total = sum(rates)
        if total <= 0.0:
            raise ContractViolationError(
                f"mark requested at t={t} where all atom rates vanish")
        u = rng.uniform() * total
        acc = 0.0
        for (mark, _), r in zip(self.atoms, rates):
            acc += r
            if u <= acc:
                return mark
        return self.atoms[-1][0]

    def integrate_marks(self, fn, region=None, t=0.0, history=EMPTY_HISTORY,
                        right_limit=False):
        regions = _as_regions(region)
        total = 0.0
        for mark, model in self.atoms:
            if regions is None or any(r.contains(mark) for r in regions):
                total += fn(mark) * self._rate_of(model, t, history, right_limit)
        return total

    @property
    def is_static(self):
        return all(isinstance(m, HomogeneousRate) for _, m in self.atoms)

    def __repr__(self):
        return f"DiscreteAtomsMeasure({len(self.atoms)} atoms on {self.support})"


class DensityFormMeasure(WakaraseMeasure):
    """total-rate model times a conditional mark law."""

    def __init__(self, rate_model: IntensityModel, mark_law: MarkLaw):
        if not isinstance(rate_model, IntensityModel):
            raise DomainError(f"rate_model must be an IntensityModel, got {rate_model!r}")
        if not isinstance(mark_law, MarkLaw):
            raise DomainError(f"mark_law must be a MarkLaw, got {mark_law!r}")
        self.rate_model = rate_model
        self.mark_law = mark_law
        self.support = mark_law.support

    def _rate(self, t, history, right_limit):
        if right_limit:
            return self.rate_model.rate_right(t, history)
        return intensity_at(self.rate_model, t, history)

    def mass(self, region, t=0.0, history=EMPTY_HISTORY, right_limit=False):
        rate = self._rate(t, history, right_limit)
        if rate == 0.0:
            return 0.0
        regions = _as_regions(region)
        if regions is None:
            return rate
        return rate * sum(self.mark_law.interval_mass(r, t, history) for r in regions)

    def total_model(self):
        return self.rate_model

    def sample_mark(self, rng, t, history):
        return self.mark_law.sample(rng, t, history)

    def integrate_marks(self, fn, region=None, t=0.0, history=EMPTY_HISTORY,
                        right_limit=False):
        rate = self._rate(t, history, right_limit)
        if rate == 0.0:
            return 0.0
        regions = _as_regions(region)
        if regions is None:
            return rate * self.mark_law.expectation_of(fn, None, t, history)
        return rate * sum(self.mark_law.expectation_of(fn, r, t, history)
                          for r in regions)

    @property
    def is_static(self):
        return isinstance(self.rate_model, HomogeneousRate) and self.mark_law.is_static

    def __repr__(self):
        return f"DensityFormMeasure({self.rate_model!r} x {self.mark_law!r})"


def mark_drawer(mu: WakaraseMeasure) -> Callable:
    """Adapt a measure's sample_mark to the (t, history, rng) drawer contract."""
    return lambda t, history, rng: mu.sample_mark(rng, t, history)


def density_on_interval(density: float, lo: float, hi: float) -> DensityFormMeasure:
    """Measure with constant Lebesgue density on (lo, hi]."""
    if density <= 0:
        raise DomainError(f"density must be positive, got {density}")
    return DensityFormMeasure(HomogeneousRate(density * (hi - lo)),
                              UniformMarks(lo, hi))


def measure_of_set(mu: WakaraseMeasure, region, t: float = 0.0,
                   history: PathHistory = EMPTY_HISTORY) -> float:
    """mu(region | t, history) for a region of mark intervals."""
    if t < history.origin:
        raise DomainError(f"evaluation time {t} precedes history origin")
    return mu.mass(_as_regions(region), t, history)


# ---------------------------------------------------------------------------
# Order condition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderConditionReport:
    estimate: float
    standard_error: float
    n_paths: int
    ceiling: float
    exceeded: bool


def _min1_z2(z: float) -> float:
    return min(1.0, z * z)


def check_order_condition(mu: WakaraseMeasure, T: float, n_paths: int = 256,
                          rng: Optional[RngStream] = None, ceiling: float = 1e6,
                          quad_step: float = 1e-2) -> OrderConditionReport:
    """Monte-Carlo estimate of the expected time integral of min(1, z^2) dmu.

    For static measures the estimate is the exact deterministic integral and
    the MC collapses (standard error 0).
    """
    if not (T > 0 and math.isfinite(T)):
        raise DomainError(f"horizon must be positive finite, got {T}")
    if mu.is_static:
        g = mu.integrate_marks(_min1_z2)
        est = g * T
        return OrderConditionReport(est, 0.0, 0, ceiling, not est < ceiling)
    if rng is None:
        raise DomainError("path-dependent measures need an rng for the estimate")
    totals = []
    for k in range(n_paths):
        stream = rng.substream(k)
        events = _simulate_thinning(mu.total_model(), T, stream,
                                    draw_mark=mark_drawer(mu))
        hist = PathHistory(tuple(events), validate=False)
        breaks = [e.time for e in events if 0.0 < e.time < T]
        total = 0.0
        for a, b in split_segments(0.0, T, breaks):
            n = max(1, int(math.ceil((b - a) / quad_step - 1e-12)))
            xs = np.linspace(a, b, n + 1)
            ys = np.empty(n + 1)
            ys[0] = mu.integrate_marks(_min1_z2, None, a, hist, right_limit=True)
            for i in range(1, n + 1):
                ys[i] = mu.integrate_marks(_min1_z2, None, xs[i], hist)
            total += float(np.sum((ys[:-1] + ys[1:]) * 0.5 * np.diff(xs)))
        totals.append(total)
        if not math.isfinite(total) or total > ceiling:
            arr = np.asarray(totals)
            return OrderConditionReport(float(arr.mean()),
                                        float(arr.std(ddof=1) / math.sqrt(len(arr)))
                                        if len(arr) > 1 else 0.0,
                                        len(arr), ceiling, True)
    arr = np.asarray(totals)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    est = float(arr.mean())
    return OrderConditionReport(est, se, n_paths, ceiling, not est < ceiling)


# ---------------------------------------------------------------------------
# Mark grids and discretization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkGrid:
    """Sorted positive grid points; level counts refinements from {1}."""

    points: tuple
    level: int

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if not pts:
            raise DomainError("a mark grid needs at least one point")
        if any(p <= 0 for p in pts):
            raise DomainError("grid points must be positive")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise DomainError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def cells(self) -> list:
        """Half-open cells [z_m, z_{m+1}), the last extending to infinity."""
        out = []
        pts = self.points
        for a, b in zip(pts, pts[1:]):
            out.append((a, b))
        out.append((pts[-1], math.inf))
        return out

    def cell_of(self, mark: float) -> int:
        """Index of the cell whose left endpoint is the given grid point."""
        i = bisect.bisect_left(self.points, mark)
        if i >= len(self.points) or self.points[i] != mark:
            raise DomainError(f"{mark} is not a grid point")
        return i


def refine_grid(grid: MarkGrid) -> MarkGrid:
    """One refinement step: halve below, extend above, split every cell."""
    pts = grid.points
    new = [0.5 * pts[0]]
    for a, b in zip(pts, pts[1:]):
        new.append(a)
        new.append(0.5 * (a + b))
    new.append(pts[-1])
    new.append(pts[-1] + 1.0)
    return MarkGrid(tuple(new), grid.level + 1)


def mark_grid(level: int) -> MarkGrid:
    """The standard grid at the given refinement level (level 1 is {1})."""
    if level < 1:
        raise DomainError(f"grid level must be >= 1, got {level}")
    g = MarkGrid((1.0,), 1)
    for _ in range(level - 1):
        g = refine_grid(g)
    return g


def _signed_cells(grid: MarkGrid, negative: bool) -> list:
    """Cells as (atom_mark, MarkInterval); mirrored for the negative axis."""
    out = []
    for lo, hi in grid.cells():
        if negative:
            iv = (MarkInterval(-math.inf, -lo, False, True) if math.isinf(hi)
                  else MarkInterval(-hi, -lo, False, True))
            out.append((-lo, iv))
        else:
            iv = (MarkInterval(lo, math.inf, True, False) if math.isinf(hi)
                  else MarkInterval(lo, hi, True, False))
            out.append((lo, iv))
    return out


def _cell_rate_model(mu: WakaraseMeasure, interval: MarkInterval) -> IntensityModel:
    """Intensity model of the arrivals whose marks fall in the interval."""
    if isinstance(mu, DiscreteAtomsMeasure):
        inside = [m for mark, m in mu.atoms if interval.contains(mark)]
        if not inside:
            return HomogeneousRate(0.0)
        if len(inside) == 1:
            return inside[0]
        return SumRate(inside)
    if isinstance(mu, DensityFormMeasure):
        if mu.mark_law.is_static:
            return mu.rate_model.scaled(mu.mark_law.interval_mass(interval))
        from .point_process import CustomRate
        rate_model, law = mu.rate_model, mu.mark_law
        return CustomRate(
            rule=lambda t, h: rate_model.rate(t, h) * law.interval_mass(interval, t, h),
            bound=lambda t, h, la: rate_model.dominating(t, h, la))
    raise UnsupportedModelError(f"cannot derive cell rates for {mu!r}")


def discretize(mu: WakaraseMeasure, grid: MarkGrid, t: Optional[float] = None,
               history: PathHistory = EMPTY_HISTORY) -> DiscreteAtomsMeasure:
    """Project the measure onto the grid's cells.

    With t given, atom rates are the frozen cell masses at (t, history); with
    t omitted, atoms carry live rate models so the result can be simulated.
    Mass below the smallest grid point is dropped (see dropped_low_mass).
    """
    lo_support, hi_support = mu.support
    sides = [False] if lo_support >= 0 else ([True] if hi_support <= 0 else [True, False])
    atoms = []
    for negative in sides:
        for mark, iv in _signed_cells(grid, negative):
            if t is not None:
                atoms.append((mark, HomogeneousRate(mu.mass((iv,), t, history))))
            else:
                atoms.append((mark, _cell_rate_model(mu, iv)))
    return DiscreteAtomsMeasure(atoms, grid=grid)


def dropped_low_mass(mu: WakaraseMeasure, grid: MarkGrid, t: float = 0.0,
                     history: PathHistory = EMPTY_HISTORY) -> float:
    """Mass of (0, z_min) plus its mirror, which discretize leaves out."""
    z_min = grid.points[0]
    regions = [MarkInterval(0.0, z_min, False, False)]
    if mu.support[0] < 0:
        regions.append(MarkInterval(-z_min, 0.0, False, False))
    return mu.mass(tuple(regions), t, history)
