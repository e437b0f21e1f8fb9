"""Marked-path construction: direct simulation, grid discretization, and
coupled refinement families.

A family couples the discretized processes across grid levels 1..K on one
probability space: every level-n event survives to level n+1 at the same
time, its mark either staying at the cell's left endpoint or promoting to the
newly inserted point with probability mass(upper child) / mass(parent cell);
only the new bottom cell below the previous smallest grid point receives
fresh arrivals.  Extending the family depth never changes the shallower
levels, because each refinement step draws only from substreams keyed by the
level it builds.
"""
from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import EMPTY_HISTORY, JumpEvent, PathHistory, RngStream
from .errors import (ContractViolationError, DomainError, RunawayProcessError,
                     UnsupportedModelError)
from .point_process import (DEFAULT_EVENT_CAP, _BOUND_SLACK, _model_driving,
                            _simulate_thinning)
from .wakarase import (MarkGrid, MarkInterval, WakaraseMeasure,
                       _cell_rate_model, cell, discretize, dropped_low_mass,
                       mark_drawer, mark_grid, refine_grid)

log = logging.getLogger(__name__)

_RATIO_SLACK = 1e-9


# ---------------------------------------------------------------------------
# Path containers
# ---------------------------------------------------------------------------

class _MarkedPathMixin:
    """Counting and mark-sum views over a finite event list."""

    events: tuple
    horizon: float

    def times(self) -> np.ndarray:
        return np.asarray([e.time for e in self.events])

    def marks(self) -> np.ndarray:
        return np.asarray([e.mark for e in self.events])

    def count_at(self, t: float) -> int:
        """Number of events with time <= t (right-continuous)."""
        return bisect.bisect_right([e.time for e in self.events], t)

    def mark_sum_at(self, t: float) -> float:
        i = self.count_at(t)
        return float(sum(e.mark for e in self.events[:i]))

    def counting_path(self, times: Sequence[float]) -> np.ndarray:
        ev = [e.time for e in self.events]
        return np.asarray([bisect.bisect_right(ev, t) for t in times], dtype=float)

    def mark_sum_path(self, times: Sequence[float]) -> np.ndarray:
        ev = [e.time for e in self.events]
        cum = np.concatenate([[0.0], np.cumsum([e.mark for e in self.events])])
        idx = [bisect.bisect_right(ev, t) for t in times]
        return cum[idx]

    def as_history(self) -> PathHistory:
        return PathHistory(self.events)

    @property
    def terminal_count(self) -> int:
        return len(self.events)

    @property
    def terminal_mark_sum(self) -> float:
        return float(sum(e.mark for e in self.events))


@dataclass(frozen=True)
class MesugakiPath(_MarkedPathMixin):
    """A directly simulated marked path on [0, horizon]."""

    events: tuple
    horizon: float


@dataclass(frozen=True)
class DiscreteMesugakiPath(_MarkedPathMixin):
    """A marked path whose marks live on a grid."""

    events: tuple
    horizon: float
    grid: MarkGrid
    dropped_mass: Optional[float] = None

    @property
    def level(self) -> int:
        return self.grid.level


def simulate_mesugaki(mu: WakaraseMeasure, T: float, rng: RngStream,
                      cap: int = DEFAULT_EVENT_CAP,
                      lookahead: float = 1.0) -> MesugakiPath:
    """Simulate the marked process with conditional rate measure mu directly.

    Requires a finite total rate; measures with infinite mass near 0 must be
    discretized or truncated first.
    """
    events = _simulate_thinning(mu.total_model(), T, rng,
                                draw_mark=mark_drawer(mu),
                                cap=cap, lookahead=lookahead)
    return MesugakiPath(tuple(events), float(T))


def simulate_discrete(mu: WakaraseMeasure, grid: MarkGrid, T: float,
                      rng: RngStream, cap: int = DEFAULT_EVENT_CAP,
                      lookahead: float = 1.0) -> DiscreteMesugakiPath:
    """Simulate the grid discretization of mu as competing cell arrivals."""
    disc = discretize(mu, grid)
    events = _simulate_thinning(disc.total_model(), T, rng,
                                draw_mark=mark_drawer(disc),
                                cap=cap, lookahead=lookahead)
    dropped = dropped_low_mass(mu, grid) if mu.is_static else None
    return DiscreteMesugakiPath(tuple(events), float(T), grid, dropped)


# ---------------------------------------------------------------------------
# Refinement coupling
# ---------------------------------------------------------------------------

def _split_prob(mu, parent: MarkInterval, upper: MarkInterval, t: float,
                history: PathHistory) -> tuple:
    """(promotion probability, anomaly flag). Clamped to [0, 1]."""
    num = mu.mass((upper,), t, history)
    den = mu.mass((parent,), t, history)
    if num < 0.0 or den < 0.0:
        raise ContractViolationError(
            f"negative cell mass at t={t}: parent={den}, child={num}")
    if den == 0.0:
        if num > 0.0:
            raise ContractViolationError(
                f"child cell carries mass {num} inside a massless parent at t={t}")
        log.warning("split at t=%s in a massless parent cell %s; keeping the "
                    "inherited mark", t, parent)
        return 0.0, True
    p = num / den
    if p > 1.0 + _RATIO_SLACK:
        log.warning("child/parent mass ratio %.12g exceeds 1 at t=%s; clamping", p, t)
        return 1.0, True
    return min(1.0, p), False


def split_probability(mu: WakaraseMeasure, parent: MarkInterval,
                      upper_child: MarkInterval, t: float = 0.0,
                      history: PathHistory = EMPTY_HISTORY) -> float:
    """Probability that an inherited event promotes into the upper child cell."""
    p, _ = _split_prob(mu, parent, upper_child, t, history)
    return p


@dataclass(frozen=True)
class SplitRecord:
    """Bookkeeping for one refinement step of a coupled family."""

    level_from: int
    level_to: int
    n_inherited: int
    n_promoted: int
    n_fresh: int
    n_anomalies: int


def _refine_level(mu, grid_from: MarkGrid, grid_to: MarkGrid,
                  parent_events: tuple, T: float, xi_rng: RngStream,
                  fresh_rng: RngStream, cap: int, lookahead: float):
    """One coupled refinement step. Returns (events, SplitRecord)."""
    pts_from = grid_from.points
    pts_to = grid_to.points
    bottom_mark = pts_to[0]
    fresh_model = _cell_rate_model(mu, cell(bottom_mark, pts_from[0]))

    parent_times = [e.time for e in parent_events]
    n_parent = len(parent_events)

    out: list = []
    out_times: list = []
    hist = PathHistory(out, _model_driving(fresh_model), 0.0,
                       validate=False, _times=out_times)

    n_promoted = 0
    n_fresh = 0
    n_anomalies = 0
    i_parent = 0
    t = 0.0

    while i_parent < n_parent or t < T:
        tau_b = parent_times[i_parent] if i_parent < n_parent else math.inf
        if t >= tau_b:
            ev = parent_events[i_parent]
            j = bisect.bisect_left(pts_from, ev.mark)
            if j >= len(pts_from) or pts_from[j] != ev.mark:
                raise ContractViolationError(
                    f"inherited mark {ev.mark} is not a level-{grid_from.level} "
                    f"grid point")
            parent_hi = pts_from[j + 1] if j + 1 < len(pts_from) else math.inf
            upper_lo = pts_to[grid_to.cell_of(ev.mark) + 1]
            parent_iv = MarkInterval(ev.mark, parent_hi)
            upper_iv = MarkInterval(upper_lo, parent_hi)
            p, anomaly = _split_prob(mu, parent_iv, upper_iv, tau_b, hist)
            n_anomalies += anomaly
            xi = xi_rng.uniform()
            new_mark = upper_lo if xi < p else ev.mark
            n_promoted += new_mark != ev.mark
            out.append(JumpEvent(tau_b, new_mark))
            out_times.append(tau_b)
            if len(out) > cap:
                raise RunawayProcessError(f"event cap {cap} exceeded at t={tau_b}")
            i_parent += 1
            continue

        hard_end = min(T, tau_b)
        window = hard_end - t if fresh_model.window_free else min(lookahead, hard_end - t)
        bound = fresh_model.dominating(t, hist, window)
        if not math.isfinite(bound):
            raise UnsupportedModelError(
                "dominating rate of the fresh cell is not finite")
        if bound <= 0.0:
            t += window
            continue
        w = fresh_rng.exponential(1.0 / bound)
        if w >= window:
            t += window
            continue
        tau = t + w
        if out_times and tau == out_times[-1]:
            t = tau
            continue
        lam = fresh_model.rate(tau, hist)
        if lam > bound * (1.0 + _BOUND_SLACK) + 1e-300:
            raise ContractViolationError(
                f"dominating rate {bound} exceeded by fresh-cell intensity "
                f"{lam} at t={tau}")
        if fresh_rng.uniform() * bound <= lam:
            out.append(JumpEvent(tau, bottom_mark))
            out_times.append(tau)
            n_fresh += 1
            if len(out) > cap:
                raise RunawayProcessError(f"event cap {cap} exceeded at t={tau}")
        t = tau

    record = SplitRecord(grid_from.level, grid_to.level, n_parent,
                         n_promoted, n_fresh, n_anomalies)
    return tuple(out), record


@dataclass(frozen=True)
class CoupledFamily:
    """Discretized paths at grid levels 1..depth on one probability space."""

    measure: WakaraseMeasure = field(compare=False)
    horizon: float = 0.0
    depth: int = 0
    grids: tuple = ()
    levels: tuple = ()
    split_records: tuple = ()

    def _check_level(self, n: int) -> int:
        if not 1 <= n <= self.depth:
            raise DomainError(f"level must be in 1..{self.depth}, got {n}")
        return n - 1

    def level_events(self, n: int) -> tuple:
        return self.levels[self._check_level(n)]

    def level_path(self, n: int) -> DiscreteMesugakiPath:
        i = self._check_level(n)
        return DiscreteMesugakiPath(self.levels[i], self.horizon, self.grids[i])

    def counting(self, n: int, t: Optional[float] = None) -> int:
        p = self.level_path(n)
        return p.terminal_count if t is None else p.count_at(t)

    def mark_sum(self, n: int, t: Optional[float] = None) -> float:
        p = self.level_path(n)
        return p.terminal_mark_sum if t is None else p.mark_sum_at(t)

    def stabilization_fraction(self, n: int) -> float:
        """Fraction of level-n events already carrying their depth-K mark."""
        i = self._check_level(n)
        deep = {e.time: e.mark for e in self.levels[-1]}
        events = self.levels[i]
        if not events:
            return 1.0
        hits = 0
        for e in events:
            if e.time not in deep:
                raise ContractViolationError(
                    f"level-{n} event at t={e.time} missing from depth level")
            hits += deep[e.time] == e.mark
        return hits / len(events)

    def sup_distance(self, n: int, m: int, kind: str = "mark_sum") -> float:
        """Uniform distance on [0, horizon] between two levels' paths."""
        return _sup_distance(self.level_events(n), self.level_events(m), kind)


def _sup_distance(events_a: tuple, events_b: tuple, kind: str) -> float:
    if kind == "counting":
        weight = lambda mark: 1.0
    elif kind == "mark_sum":
        weight = lambda mark: mark
    else:
        raise DomainError(f"kind must be 'counting' or 'mark_sum', got {kind!r}")
    deltas = [(e.time, weight(e.mark)) for e in events_a]
    deltas += [(e.time, -weight(e.mark)) for e in events_b]
    deltas.sort(key=lambda d: d[0])
    sup = 0.0
    running = 0.0
    i = 0
    while i < len(deltas):
        t = deltas[i][0]
        while i < len(deltas) and deltas[i][0] == t:
            running += deltas[i][1]
            i += 1
        sup = max(sup, abs(running))
    return sup


def simulate_coupled(mu: WakaraseMeasure, T: float, depth: int,
                     rng: RngStream, cap: int = DEFAULT_EVENT_CAP,
                     lookahead: float = 1.0) -> CoupledFamily:
    """Simulate a coupled family of grid discretizations at levels 1..depth.

    Stream discipline: level 1 thins with substream (2, 1); the step to level
    n+1 draws promotion variables from substream (1, n+1) in event-time order
    and fresh bottom-cell arrivals from substream (2, n+1).  Levels 1..K of a
    depth-K' > K family are identical to the depth-K family for the same rng.
    """
    if depth < 1:
        raise DomainError(f"depth must be >= 1, got {depth}")
    if mu.support[0] < 0:
        raise UnsupportedModelError(
            "coupled refinement runs on positive marks; split a signed "
            "measure by sign and couple each part")

    grids = [mark_grid(1)]
    while len(grids) < depth:
        grids.append(refine_grid(grids[-1]))

    disc1 = discretize(mu, grids[0])
    level1 = tuple(_simulate_thinning(disc1.total_model(), T, rng.substream(2, 1),
                                      draw_mark=mark_drawer(disc1),
                                      cap=cap, lookahead=lookahead))
    levels = [level1]
    records = []
    for n in range(1, depth):
        events, record = _refine_level(mu, grids[n - 1], grids[n], levels[-1],
                                       float(T), rng.substream(1, n + 1),
                                       rng.substream(2, n + 1), cap, lookahead)
        levels.append(events)
        records.append(record)

    return CoupledFamily(mu, float(T), depth, tuple(grids), tuple(levels),
                         tuple(records))


# ---------------------------------------------------------------------------
# Convergence diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelStat:
    level: int
    mean_count: float
    se_count: float
    mean_mark_sum: float
    se_mark_sum: float
    mean_stabilization: float


@dataclass(frozen=True)
class PairStat:
    level_coarse: int
    level_fine: int
    mean_square_gap: float
    standard_error: float
    mu_bound: Optional[float]
    bound_violated: Optional[bool]


@dataclass(frozen=True)
class ConvergenceReport:
    horizon: float
    depth: int
    n_paths: int
    level_stats: tuple
    pairs: tuple

    def to_json_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "depth": self.depth,
            "n_paths": self.n_paths,
            "levels": [{
                "level": s.level,
                "mean_count": s.mean_count,
                "se_count": s.se_count,
                "mean_mark_sum": s.mean_mark_sum,
                "se_mark_sum": s.se_mark_sum,
                "mean_stabilization": s.mean_stabilization,
            } for s in self.level_stats],
            "pairs": [{
                "levels": [p.level_coarse, p.level_fine],
                "mean_square_gap": p.mean_square_gap,
                "standard_error": p.standard_error,
                "mu_bound": p.mu_bound,
                "bound_violated": p.bound_violated,
            } for p in self.pairs],
        }


def _second_moment(mu: WakaraseMeasure) -> float:
    return mu.integrate_marks(lambda z: z * z)


def pair_gap_bound(mu: WakaraseMeasure, T: float, level_coarse: int) -> Optional[float]:
    """Second-moment bound T * (I(mu) - I(mu_n)) on the mean squared terminal
    gap between the coarse level and any finer coupled level.

    Only available for static measures; returns None otherwise.
    """
    if not mu.is_static:
        return None
    full = _second_moment(mu)
    disc = discretize(mu, mark_grid(level_coarse), t=0.0)
    return T * (full - _second_moment(disc))


def coupled_path_stats(mu: WakaraseMeasure, T: float, depth: int,
                       pairs: Sequence[tuple], stream: RngStream,
                       cap: int = DEFAULT_EVENT_CAP,
                       lookahead: float = 1.0) -> tuple:
    """Per-path raw statistics for convergence assembly.

    Returns (counts, mark_sums, stabilization fractions, squared pair gaps),
    the first three indexed by level.
    """
    fam = simulate_coupled(mu, T, depth, stream, cap=cap, lookahead=lookahead)
    counts = [float(fam.counting(n)) for n in range(1, depth + 1)]
    sums = [fam.mark_sum(n) for n in range(1, depth + 1)]
    stab = [fam.stabilization_fraction(n) for n in range(1, depth + 1)]
    gaps = [(sums[m - 1] - sums[n - 1]) ** 2 for n, m in pairs]
    return counts, sums, stab, gaps


def _normalize_pairs(pairs, depth):
    if pairs is None:
        pairs = [(n, n + 1) for n in range(1, depth)]
    pairs = [(int(n), int(m)) for n, m in pairs]
    for n, m in pairs:
        if not (1 <= n < m <= depth):
            raise DomainError(f"bad level pair ({n}, {m}) for depth {depth}")
    return pairs


def assemble_convergence(mu: WakaraseMeasure, T: float, depth: int,
                         pairs: Sequence[tuple],
                         rows: Sequence[tuple]) -> ConvergenceReport:
    """Build the report from per-path rows produced by coupled_path_stats."""
    n_paths = len(rows)
    if n_paths < 2:
        raise DomainError(f"need at least 2 paths, got {n_paths}")
    counts = np.asarray([r[0] for r in rows])
    sums = np.asarray([r[1] for r in rows])
    stab = np.asarray([r[2] for r in rows])
    gaps = np.asarray([r[3] for r in rows])

    sqrt_n = math.sqrt(n_paths)
    level_stats = tuple(
        LevelStat(n,
                  float(counts[:, n - 1].mean()),
                  float(counts[:, n - 1].std(ddof=1) / sqrt_n),
                  float(sums[:, n - 1].mean()),
                  float(sums[:, n - 1].std(ddof=1) / sqrt_n),
                  float(stab[:, n - 1].mean()))
        for n in range(1, depth + 1))

    pair_stats = []
    for k, (n, m) in enumerate(pairs):
        est = float(gaps[:, k].mean())
        se = float(gaps[:, k].std(ddof=1) / sqrt_n)
        bound = pair_gap_bound(mu, T, n)
        violated = None if bound is None else bool(est - 2.0 * se > bound)
        pair_stats.append(PairStat(n, m, est, se, bound, violated))

    return ConvergenceReport(float(T), depth, n_paths, level_stats,
                             tuple(pair_stats))


def diagnose_convergence(mu: WakaraseMeasure, T: float, depth: int,
                         n_paths: int, rng: RngStream,
                         pairs: Optional[Sequence[tuple]] = None,
                         cap: int = DEFAULT_EVENT_CAP,
                         lookahead: float = 1.0) -> ConvergenceReport:
    """Monte-Carlo convergence diagnostics over coupled families.

    For each requested level pair the mean squared terminal mark-sum gap is
    estimated and, for static measures, compared with the second-moment
    bound; the violation flag is reported as data, never raised.
    """
    pairs = _normalize_pairs(pairs, depth)
    rows = [coupled_path_stats(mu, T, depth, pairs, rng.substream(i),
                               cap=cap, lookahead=lookahead)
            for i in range(n_paths)]
    return assemble_convergence(mu, T, depth, pairs, rows)
