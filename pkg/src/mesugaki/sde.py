"""Euler simulation of jump SDEs driven by a marked point process.

The state follows

    dX = a(t, X) dt + b(t, X) dB
         + small-jump increments h_small(t, X-, z), |z| < 1
         + large-jump increments h_large(t, X-, z), |z| >= 1,

where the jumps arrive with the conditional rate measure.  When small jumps
are compensated, the drift actually integrated is the effective drift

    a_eff(t, x) = a(t, x) - integral of h_small(t, x, z) over |z| < 1 d mu,

so the compensated small-jump martingale and the plain drift never have to be
tracked separately.  The simulator records every Euler substep (left node,
dt, Brownian increment, coefficients used) and every jump with its left
limit; the verification module replays that ledger.

The measure may condition on its own event history and a driving path, but
not on X.  State-dependent jump rates for pure-jump states are still
expressible, because there the state is a deterministic function of the event
history (see discrete_state_process).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .core import JumpEvent, PathHistory, RngStream, TimeGrid
from .errors import DomainError
from .point_process import (CoxRate, CustomRate, DEFAULT_EVENT_CAP,
                            ExpKernel, HawkesRate, HomogeneousRate,
                            _check_stability)
from .wakarase import (DensityFormMeasure, DiscreteAtomsMeasure, MarkLaw,
                       WakaraseMeasure)
from .integral import small_jump_window
from .construction import simulate_mesugaki

_SMALL_REGIONS = small_jump_window().regions()


def _zero(t: float, x: float) -> float:
    return 0.0


def _identity_jump(t: float, x: float, z: float) -> float:
    return z


@dataclass(frozen=True)
class MesugakiSDESpec:
    """Coefficients and jump measure of the state equation."""

    measure: WakaraseMeasure
    drift: Callable = _zero
    diffusion: Callable = _zero
    small_jump: Callable = _identity_jump
    large_jump: Callable = _identity_jump
    x0: float = 0.0
    compensate_small: bool = True
    #: optional closed form for the small-jump compensator rate
    #: c(t, x) = integral of h_small(t, x, z) over |z| < 1 d mu; must agree
    #: with the numerical measure integral when supplied.
    small_compensator: Optional[Callable] = None

    def small_rate(self, t: float, x: float, history: PathHistory) -> float:
        if not self.compensate_small:
            return 0.0
        if self.small_compensator is not None:
            return self.small_compensator(t, x)
        # right limit: at an event time the new event is already in force on
        # the substep that starts there
        return self.measure.integrate_marks(
            lambda z: self.small_jump(t, x, z), _SMALL_REGIONS, t, history,
            right_limit=True)

    def effective_drift(self, t: float, x: float, history: PathHistory) -> float:
        return self.drift(t, x) - self.small_rate(t, x, history)


class JumpRecord(NamedTuple):
    time: float
    mark: float
    x_minus: float
    size: float
    large: bool


@dataclass(frozen=True)
class SampledPath:
    """One Euler path with its full substep and jump ledger."""

    horizon: float
    x0: float
    step_times: np.ndarray = field(compare=False)   # left node of each substep
    step_dt: np.ndarray = field(compare=False)
    step_dB: np.ndarray = field(compare=False)
    step_x: np.ndarray = field(compare=False)       # state at the left node
    step_drift: np.ndarray = field(compare=False)   # effective drift used
    step_diffusion: np.ndarray = field(compare=False)
    jumps: tuple = ()
    events: tuple = ()                              # underlying marked events
    terminal: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.step_dt)

    def state_at_nodes(self) -> np.ndarray:
        """State sampled at every substep's left node plus the terminal."""
        return np.append(self.step_x, self.terminal)


def euler_simulate(spec: MesugakiSDESpec, T: float, step: float,
                   rng: RngStream, cap: int = DEFAULT_EVENT_CAP,
                   lookahead: float = 1.0) -> SampledPath:
    """Simulate the state on [0, T] with substeps of length at most `step`.

    The marked events are thinned first (substream 0), then the diffusion is
    filled in between event times (substream 1); both phases are exact in
    distribution because the measure never conditions on the state.
    """
    grid = TimeGrid(float(T), float(step))
    marked = simulate_mesugaki(spec.measure, T, rng.substream(0),
                               cap=cap, lookahead=lookahead)
    events = marked.events
    history = PathHistory(events, validate=False)
    brownian = rng.substream(1)

    knots = sorted(set(grid.nodes().tolist()) | {e.time for e in events})
    event_times = {e.time: e for e in events}

    s_t: list = []
    s_dt: list = []
    s_dB: list = []
    s_x: list = []
    s_a: list = []
    s_b: list = []
    jumps: list = []

    x = float(spec.x0)
    for u, v in zip(knots, knots[1:]):
        n_sub = max(1, int(math.ceil((v - u) / step - 1e-12)))
        dt = (v - u) / n_sub
        for k in range(n_sub):
            t_left = u + k * dt
            a = spec.effective_drift(t_left, x, history)
            b = spec.diffusion(t_left, x)
            dB = brownian.normal(math.sqrt(dt)) if b != 0.0 else 0.0
            s_t.append(t_left)
            s_dt.append(dt)
            s_dB.append(dB)
            s_x.append(x)
            s_a.append(a)
            s_b.append(b)
            x = x + a * dt + b * dB
        ev = event_times.get(v)
        if ev is not None:
            large = abs(ev.mark) >= 1.0
            h = spec.large_jump if large else spec.small_jump
            size = h(ev.time, x, ev.mark)
            jumps.append(JumpRecord(ev.time, ev.mark, x, size, large))
            x = x + size

    return SampledPath(float(T), float(spec.x0),
                       np.asarray(s_t), np.asarray(s_dt), np.asarray(s_dB),
                       np.asarray(s_x), np.asarray(s_a), np.asarray(s_b),
                       tuple(jumps), events, float(x))


# ---------------------------------------------------------------------------
# Factories
# ---------------------------------------------------------------------------

def compound_poisson(rate: float, law: MarkLaw, drift: Callable = _zero,
                     diffusion: Callable = _zero, x0: float = 0.0,
                     compensate_small: bool = False) -> MesugakiSDESpec:
    """Sum of iid marks arriving at a constant rate, plus optional diffusion."""
    mu = DensityFormMeasure(HomogeneousRate(rate), law)
    return MesugakiSDESpec(mu, drift=drift, diffusion=diffusion, x0=x0,
                           compensate_small=compensate_small)


def compound_hawkes(base: float, excitation: float, decay: float, law: MarkLaw,
                    drift: Callable = _zero, diffusion: Callable = _zero,
                    x0: float = 0.0,
                    compensate_small: bool = False) -> MesugakiSDESpec:
    """Self-exciting arrivals with exponential kernel; rejects unstable kernels."""
    model = HawkesRate(base, ExpKernel(excitation, decay))
    _check_stability(model)
    mu = DensityFormMeasure(model, law)
    return MesugakiSDESpec(mu, drift=drift, diffusion=diffusion, x0=x0,
                           compensate_small=compensate_small)


def compound_cox(phi: Callable, driving, law: MarkLaw, drift: Callable = _zero,
                 diffusion: Callable = _zero, x0: float = 0.0,
                 compensate_small: bool = False) -> MesugakiSDESpec:
    """Arrivals modulated by a deterministic driving path through phi."""
    mu = DensityFormMeasure(CoxRate(phi, driving), law)
    return MesugakiSDESpec(mu, drift=drift, diffusion=diffusion, x0=x0,
                           compensate_small=compensate_small)


def _state_of(history: PathHistory, t: float, s0: float) -> float:
    total = s0
    for e in history.events_before(t):
        total += e.mark
    return total


def discrete_state_process(s0: int, up_rate: Callable[[float], float],
                           down_rate: Callable[[float], float]) -> MesugakiSDESpec:
    """Integer birth-death state driven by unit-size jumps.

    The marks are +1 and -1, so every jump is a large jump and the state is
    the running mark sum; the transition rates read the current state back
    out of the event history, which keeps the measure inside the
    history-conditioning contract.
    """
    def make_rule(rate_fn):
        def rule(t, history):
            return max(0.0, float(rate_fn(_state_of(history, t, s0))))
        return rule

    def make_bound(rate_fn):
        def bound(t, history, lookahead):
            total = s0
            for e in history.events_through(t):
                total += e.mark
            return max(0.0, float(rate_fn(total)))
        return bound

    atoms = [(+1.0, CustomRate(make_rule(up_rate), make_bound(up_rate))),
             (-1.0, CustomRate(make_rule(down_rate), make_bound(down_rate)))]
    mu = DiscreteAtomsMeasure(atoms)
    return MesugakiSDESpec(mu, x0=float(s0), compensate_small=False)
