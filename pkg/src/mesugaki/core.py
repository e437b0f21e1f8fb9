"""Shared value types: events, path histories, RNG streams, time grids.

Everything downstream (intensity models, measures, simulators, diagnostics)
is built on the types in this module.  The central contract is predictability:
any quantity "at time t" may only depend on events strictly before t, so
`PathHistory` exposes strict left-limit queries and the simulators never leak
an event into its own intensity evaluation.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DomainError, IntegrabilityError


class JumpEvent(NamedTuple):
    """A single jump: (time, mark). Marks are nonzero; time is >= 0."""

    time: float
    mark: float


@dataclass(frozen=True)
class DrivingPath:
    """Piecewise record of an auxiliary process X_t used by Cox intensities.

    interpolation:
        "linear"   continuous piecewise-linear interpolation,
        "previous" left-continuous steps (value of the segment ending at t).
    Queries clamp to the recorded range.
    """

    times: tuple
    values: tuple
    interpolation: str = "linear"

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        vs = tuple(float(v) for v in self.values)
        if len(ts) != len(vs) or len(ts) == 0:
            raise DomainError("driving path needs matching nonempty times/values")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DomainError("driving path times must be strictly increasing")
        if self.interpolation not in ("linear", "previous"):
            raise DomainError(f"unknown interpolation {self.interpolation!r}")
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "values", vs)

    def value_at(self, t: float) -> float:
        ts, vs = self.times, self.values
        if t <= ts[0]:
            return vs[0]
        if t >= ts[-1]:
            return vs[-1]
        i = bisect.bisect_left(ts, t)
        # ts[i-1] < t <= ts[i]
        if self.interpolation == "previous":
            return vs[i - 1]
        if ts[i] == t:
            return vs[i]
        w = (t - ts[i - 1]) / (ts[i] - ts[i - 1])
        return vs[i - 1] + w * (vs[i] - vs[i - 1])

    def breakpoints_in(self, a: float, b: float) -> list:
        lo = bisect.bisect_right(self.times, a)
        hi = bisect.bisect_left(self.times, b)
        return list(self.times[lo:hi])


@dataclass(frozen=True)
class PathHistory:
    """Realized history: strictly ordered events plus an optional driving path.

    Treat instances as immutable values.  Simulators may hand a live internal
    list to the constructor with validate=False; every public constructor
    validates ordering and nonzero marks.
    """

    events: Sequence[JumpEvent] = ()
    driving_path: Optional[DrivingPath] = None
    origin: float = 0.0
    validate: bool = True
    _times: Sequence[float] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.validate:
            evs = tuple(JumpEvent(float(e[0]), float(e[1])) for e in self.events)
            for e in evs:
                if e.time < self.origin:
                    raise DomainError(f"event at {e.time} precedes origin {self.origin}")
                if e.mark == 0.0 or not math.isfinite(e.mark):
                    raise DomainError(f"event mark must be nonzero finite, got {e.mark}")
            if any(b.time <= a.time for a, b in zip(evs, evs[1:])):
                raise DomainError("event times must be strictly increasing")
            object.__setattr__(self, "events", evs)
        if self._times is None:
            object.__setattr__(self, "_times", [e.time for e in self.events])

    def __len__(self) -> int:
        return len(self.events)

    def events_before(self, t: float) -> Sequence[JumpEvent]:
        """Events with time strictly less than t (left-limit view)."""
        return self.events[: bisect.bisect_left(self._times, t)]

    def events_through(self, t: float) -> Sequence[JumpEvent]:
        """Events with time <= t (right-limit view, used at segment starts)."""
        return self.events[: bisect.bisect_right(self._times, t)]

    def count_before(self, t: float) -> int:
        return bisect.bisect_left(self._times, t)

    def before(self, t: float) -> "PathHistory":
        """Restriction of this history to events strictly before t."""
        evs = tuple(self.events_before(t))
        return PathHistory(evs, self.driving_path, self.origin, validate=False,
                           _times=[e.time for e in evs])

    def times_array(self) -> np.ndarray:
        return np.asarray(self._times, dtype=float)


EMPTY_HISTORY = PathHistory()


def history_before(history: PathHistory, t: float) -> PathHistory:
    """Strict restriction of a history to events before t."""
    if t < history.origin:
        raise DomainError(f"query time {t} precedes history origin {history.origin}")
    return history.before(t)


# ---------------------------------------------------------------------------
# RNG streams
# ---------------------------------------------------------------------------

class RngStream:
    """One independent random stream, keyed by (master_seed, stream_id).

    Streams are backed by the Philox counter-based generator seeded through
    SeedSequence spawn keys, so any (master_seed, stream_id, *subkeys) tuple
    names the same sequence of draws on every machine and under any execution
    order.  A stream must be consumed by a single worker; parallel ensembles
    give each path its own stream_id.
    """

    __slots__ = ("master_seed", "stream_id", "subkeys", "draws", "_gen")

    def __init__(self, master_seed: int, stream_id: int, subkeys: tuple = ()):
        if not (0 <= int(master_seed) < 2 ** 64):
            raise DomainError("master_seed must fit in 64 bits")
        if int(stream_id) < 0:
            raise DomainError("stream_id must be a nonnegative integer")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.subkeys = tuple(int(k) for k in subkeys)
        self.draws = 0
        ss = np.random.SeedSequence(self.master_seed,
                                    spawn_key=(self.stream_id, *self.subkeys))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def uniform(self) -> float:
        """Next uniform draw on [0, 1)."""
        self.draws += 1
        return float(self._gen.random())

    def exponential(self, mean: float = 1.0) -> float:
        self.draws += 1
        return mean * float(self._gen.standard_exponential())

    def normal(self, scale: float = 1.0) -> float:
        self.draws += 1
        return scale * float(self._gen.standard_normal())

    def uniforms(self, n: int) -> np.ndarray:
        self.draws += n
        return self._gen.random(n)

    def normals(self, n: int) -> np.ndarray:
        self.draws += n
        return self._gen.standard_normal(n)

    def substream(self, *subkeys: int) -> "RngStream":
        """Deterministically derived child stream (independent of this one)."""
        return RngStream(self.master_seed, self.stream_id, self.subkeys + subkeys)

    def __repr__(self):
        return (f"RngStream(master_seed={self.master_seed}, "
                f"stream_id={self.stream_id}, subkeys={self.subkeys}, "
                f"draws={self.draws})")


def derive_stream(master_seed: int, stream_id: int, *subkeys: int) -> RngStream:
    """Stream for one path of an ensemble. Pure function of its arguments."""
    return RngStream(master_seed, stream_id, subkeys)


# ---------------------------------------------------------------------------
# Time grids and quadrature helpers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon] with step <= horizon."""

    horizon: float
    step: float

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise DomainError(f"horizon must be positive finite, got {self.horizon}")
        if not (0 < self.step <= self.horizon):
            raise DomainError(f"step must lie in (0, horizon], got {self.step}")

    @property
    def n_steps(self) -> int:
        n = int(math.ceil(self.horizon / self.step - 1e-9))
        return max(n, 1)

    def nodes(self) -> np.ndarray:
        # last node lands exactly on the horizon
        n = self.n_steps
        xs = np.linspace(0.0, self.horizon, n + 1)
        xs[-1] = self.horizon
        return xs


def split_segments(a: float, b: float, breakpoints: Sequence[float]) -> list:
    """Partition [a, b] at the interior breakpoints. Returns (lo, hi) pairs."""
    if b < a:
        raise DomainError(f"empty segment [{a}, {b}]")
    pts = sorted({p for p in breakpoints if a < p < b})
    edges = [a] + pts + [b]
    return [(lo, hi) for lo, hi in zip(edges, edges[1:]) if hi > lo]


def trapezoid(fn: Callable[[float], float], a: float, b: float,
              max_step: float) -> float:
    """Composite trapezoid of fn on [a, b] with node spacing <= max_step."""
    if b <= a:
        return 0.0
    n = max(1, int(math.ceil((b - a) / max_step - 1e-12)))
    xs = np.linspace(a, b, n + 1)
    ys = np.array([fn(x) for x in xs], dtype=float)
    return float(np.trapezoid(ys, xs))


def adaptive_simpson(fn: Callable[[float], float], a: float, b: float,
                     abs_tol: float = 1e-10, max_depth: int = 48) -> float:
    """Adaptive Simpson quadrature with absolute tolerance abs_tol.

    Endpoints that evaluate non-finite (integrable edge singularities) are
    nudged inward by a relative 1e-12 of the interval length.
    """
    if b <= a:
        return 0.0

    def safe(x: float, lo: float, hi: float) -> float:
        v = fn(x)
        if math.isfinite(v):
            return v
        eps = (hi - lo) * 1e-12
        if x <= lo + eps:
            return fn(lo + eps)
        if x >= hi - eps:
            return fn(hi - eps)
        raise IntegrabilityError(f"integrand not finite at interior point {x}")

    fa = safe(a, a, b)
    fb = safe(b, a, b)
    m = 0.5 * (a + b)
    fm = safe(m, a, b)

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    whole = simpson(a, b, fa, fm, fb)

    def recurse(lo, hi, flo, fmid, fhi, acc, tol, depth):
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm = safe(lm, a, b)
        frm = safe(rm, a, b)
        left = simpson(lo, mid, flo, flm, fmid)
        right = simpson(mid, hi, fmid, frm, fhi)
        if depth >= max_depth:
            return left + right
        if abs(left + right - acc) <= 15.0 * tol:
            return left + right + (left + right - acc) / 15.0
        return (recurse(lo, mid, flo, flm, fmid, left, tol / 2.0, depth + 1)
                + recurse(mid, hi, fmid, frm, fhi, right, tol / 2.0, depth + 1))

    return recurse(a, b, fa, fm, fb, whole, abs_tol, 0)
