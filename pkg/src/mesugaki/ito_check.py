"""Numerical verification of the change-of-variable formula for jump
diffusions driven by marked point processes.

Given a simulated path with its substep and jump ledger, the residual

    f(X_T) - f(X_0) - [rhs assembled from the ledger]

measures how well the second-order expansion explains the path.  Two
assemblies are computed:

  * the effective form integrates f'(X) against the drift the simulator
    actually used (raw drift minus the small-jump compensator rate) and adds
    the full jump differences;
  * the standard form integrates f'(X) against the raw drift and carries the
    small-jump terms as a compensated part plus the second-order measure
    integral.

The two are algebraically equal, so their gap is a pure bookkeeping check;
the residual itself vanishes for piecewise-constant paths and shrinks like
the square root of the substep for diffusive ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import PathHistory, RngStream
from .errors import DomainError
from .sde import MesugakiSDESpec, SampledPath, _SMALL_REGIONS, euler_simulate


@dataclass(frozen=True)
class TestFunction:
    """A C^2 test function with optional analytic derivatives.

    Missing derivatives fall back to central differences with step fd_step;
    derivative_consistency quantifies the agreement where both are available.
    """

    f: Callable[[float], float]
    df: Optional[Callable[[float], float]] = None
    d2f: Optional[Callable[[float], float]] = None
    fd_step: float = 1e-5
    name: str = ""

    __test__ = False  # keep pytest from collecting this as a test case

    def deriv1(self, x: float) -> float:
        if self.df is not None:
            return self.df(x)
        h = self.fd_step
        return (self.f(x + h) - self.f(x - h)) / (2.0 * h)

    def deriv2(self, x: float) -> float:
        if self.d2f is not None:
            return self.d2f(x)
        h = self.fd_step
        return (self.f(x + h) - 2.0 * self.f(x) + self.f(x - h)) / (h * h)

    def derivative_consistency(self, points: Sequence[float]) -> float:
        """Largest relative gap between analytic and finite-difference
        derivatives over the points; 0.0 when no analytic derivative is set."""
        worst = 0.0
        h = self.fd_step
        for x in points:
            if self.df is not None:
                fd = (self.f(x + h) - self.f(x - h)) / (2.0 * h)
                scale = max(1.0, abs(fd))
                worst = max(worst, abs(self.df(x) - fd) / scale)
            if self.d2f is not None:
                fd2 = (self.f(x + h) - 2.0 * self.f(x) + self.f(x - h)) / (h * h)
                scale = max(1.0, abs(fd2))
                worst = max(worst, abs(self.d2f(x) - fd2) / scale)
        return worst


def linear_test_function(slope: float = 1.0, intercept: float = 0.0) -> TestFunction:
    return TestFunction(lambda x: slope * x + intercept,
                        lambda x: slope, lambda x: 0.0, name="linear")


def quadratic_test_function() -> TestFunction:
    return TestFunction(lambda x: x * x, lambda x: 2.0 * x, lambda x: 2.0,
                        name="square")


@dataclass(frozen=True)
class ItoReport:
    lhs: float
    rhs_effective: float
    rhs_standard: float
    residual: float
    assembly_gap: float
    n_steps: int
    n_jumps: int

    def to_json_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs_effective": self.rhs_effective,
            "rhs_standard": self.rhs_standard,
            "residual": self.residual,
            "assembly_gap": self.assembly_gap,
            "n_steps": self.n_steps,
            "n_jumps": self.n_jumps,
        }


def ito_residual(f: TestFunction, spec: MesugakiSDESpec,
                 path: SampledPath) -> ItoReport:
    """Assemble both right-hand sides from the path's ledger."""
    fp = np.asarray([f.deriv1(x) for x in path.step_x])
    fpp = np.asarray([f.deriv2(x) for x in path.step_x])
    dt = path.step_dt
    dB = path.step_dB
    b = path.step_diffusion

    drift_term = float(np.sum(fp * path.step_drift * dt))
    brownian_term = float(np.sum(fp * b * dB))
    second_order_term = float(np.sum(0.5 * fpp * b * b * dt))
    jump_term = sum(f.f(j.x_minus + j.size) - f.f(j.x_minus) for j in path.jumps)

    lhs = f.f(path.terminal) - f.f(path.x0)
    rhs_effective = drift_term + brownian_term + second_order_term + jump_term

    raw_drift_term = float(np.sum(
        fp * np.asarray([spec.drift(t, x) for t, x in zip(path.step_times,
                                                          path.step_x)]) * dt))
    correction = 0.0
    if spec.compensate_small:
        mu = spec.measure
        history = PathHistory(path.events, validate=False)
        for t, x, fpx, d in zip(path.step_times, path.step_x, fp, dt):
            # compensator of the small-jump martingale part ...
            g5 = mu.integrate_marks(
                lambda z: f.f(x + spec.small_jump(t, x, z)) - f.f(x),
                _SMALL_REGIONS, t, history, right_limit=True)
            # ... and the second-order measure term
            g6 = mu.integrate_marks(
                lambda z: (f.f(x + spec.small_jump(t, x, z)) - f.f(x)
                           - fpx * spec.small_jump(t, x, z)),
                _SMALL_REGIONS, t, history, right_limit=True)
            correction += (g6 - g5) * d
    rhs_standard = (raw_drift_term + brownian_term + second_order_term
                    + jump_term + correction)

    return ItoReport(lhs, rhs_effective, rhs_standard,
                     lhs - rhs_effective, rhs_effective - rhs_standard,
                     path.n_steps, len(path.jumps))


@dataclass(frozen=True)
class ResidualStat:
    step: float
    median_abs: float
    mean_abs: float
    rms: float
    n_paths: int


def residual_sweep(f: TestFunction, spec: MesugakiSDESpec, T: float,
                   steps: Sequence[float], n_paths: int,
                   rng: RngStream) -> tuple:
    """Median |residual| per substep size, over independent path batches.

    For diffusive paths the medians shrink like sqrt(step); for pure-jump
    paths they sit at floating-point noise independently of the step.
    """
    if n_paths < 1:
        raise DomainError(f"need at least 1 path, got {n_paths}")
    out = []
    for j, step in enumerate(steps):
        res = np.empty(n_paths)
        for i in range(n_paths):
            path = euler_simulate(spec, T, step, rng.substream(j, i))
            res[i] = ito_residual(f, spec, path).residual
        out.append(ResidualStat(float(step),
                                float(np.median(np.abs(res))),
                                float(np.mean(np.abs(res))),
                                float(np.sqrt(np.mean(res * res))),
                                n_paths))
    return tuple(out)
