"""Monte-Carlo diagnostics: moment checks, martingale z-scores, time-change
residuals, and Kolmogorov-Smirnov distances.

The KS p-values use the asymptotic Kolmogorov series at the plain scaled
statistic (no small-sample continuity corrections), which is conservative in
the direction that matters for acceptance gating: genuine model errors push p
to 0 far faster than the asymptotics flatter them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError

_KS_SERIES_TERMS = 100


@dataclass(frozen=True)
class EnsembleSummary:
    """Plain moments of a sample of path functionals."""

    n: int
    mean: float
    variance: float
    standard_error: float
    minimum: float
    maximum: float

    @staticmethod
    def of(values: Sequence[float]) -> "EnsembleSummary":
        arr = np.asarray(values, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise DomainError("need a flat sample of size >= 2")
        var = float(arr.var(ddof=1))
        return EnsembleSummary(int(arr.size), float(arr.mean()), var,
                               math.sqrt(var / arr.size),
                               float(arr.min()), float(arr.max()))

    def z_against(self, target: float) -> float:
        """Standardized distance of the sample mean from the target."""
        gap = self.mean - target
        if self.standard_error == 0.0:
            return 0.0 if gap == 0.0 else math.copysign(math.inf, gap)
        return gap / self.standard_error


@dataclass(frozen=True)
class MartingaleReport:
    n: int
    mean: float
    standard_error: float
    z: float


def martingale_mean_test(samples: Sequence[float]) -> MartingaleReport:
    """z-score of a sample of terminal martingale values against mean 0.

    A degenerate sample that is identically 0 passes with z = 0; a degenerate
    nonzero sample is an unambiguous failure and reports an infinite z.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DomainError("need a flat sample of size >= 2")
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size))
    if se == 0.0:
        z = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        z = mean / se
    return MartingaleReport(int(arr.size), mean, se, z)


def paired_difference_test(lhs: Sequence[float],
                           rhs: Sequence[float]) -> MartingaleReport:
    """z-score of E[lhs - rhs] = 0 using the paired differences."""
    a = np.asarray(lhs, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if a.shape != b.shape:
        raise DomainError(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    return martingale_mean_test(a - b)


# ---------------------------------------------------------------------------
# Time-change residuals
# ---------------------------------------------------------------------------

def time_change_residuals(compensator_values: Sequence[Sequence[float]]) -> np.ndarray:
    """Pool compensator increments between consecutive events across paths.

    Each inner sequence holds the realized compensator evaluated at that
    path's event times (ascending).  Under the model the pooled increments
    are iid standard exponentials.

    Censoring caveat: every fixed-horizon path drops the increment between
    its last event and the horizon, so the pooled sample keeps only waiting
    times short enough to complete.  With many short paths this biases the
    pool small and the Exp(1) comparison fails even for a perfectly
    simulated Poisson process.  Prefer few long paths (events per path well
    above ~50) when feeding this into a distributional test.
    """
    pooled = []
    for vals in compensator_values:
        arr = np.asarray(vals, dtype=float)
        if arr.size == 0:
            continue
        if np.any(np.diff(arr) < 0) or arr[0] < 0:
            raise DomainError("compensator values along a path must be ascending")
        pooled.append(np.diff(arr, prepend=0.0))
    if not pooled:
        return np.zeros(0)
    return np.concatenate(pooled)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KSReport:
    statistic: float
    p_value: float
    n: int
    m: Optional[int] = None


def _kolmogorov_survival(lam: float) -> float:
    """P(sup |Brownian bridge| > lam), by the alternating series."""
    if lam < 1e-8:
        return 1.0
    total = 0.0
    for k in range(1, _KS_SERIES_TERMS + 1):
        term = math.exp(-2.0 * k * k * lam * lam)
        total += -term if k % 2 == 0 else term
        if term < 1e-18:
            break
    return min(1.0, max(0.0, 2.0 * total))


def ks_one_sample(sample: Sequence[float], cdf: Callable[[float], float]) -> KSReport:
    """One-sample KS against a continuous cdf, asymptotic p-value.

    On discrete or tied data the statistic is still well defined and the test
    only gets more conservative.
    """
    arr = np.sort(np.asarray(sample, dtype=float))
    n = arr.size
    if n == 0:
        raise DomainError("empty sample")
    cdf_vals = np.asarray([cdf(x) for x in arr])
    if np.any(cdf_vals < -1e-12) or np.any(cdf_vals > 1.0 + 1e-12):
        raise DomainError("cdf values must lie in [0, 1]")
    i = np.arange(1, n + 1)
    d_plus = float(np.max(i / n - cdf_vals))
    d_minus = float(np.max(cdf_vals - (i - 1) / n))
    d = max(d_plus, d_minus)
    return KSReport(d, _kolmogorov_survival(math.sqrt(n) * d), int(n))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KSReport:
    """Two-sample KS with the asymptotic p-value at the pooled scaling."""
    xa = np.sort(np.asarray(a, dtype=float))
    xb = np.sort(np.asarray(b, dtype=float))
    n, m = xa.size, xb.size
    if n == 0 or m == 0:
        raise DomainError("both samples must be nonempty")
    pooled = np.concatenate([xa, xb])
    cdf_a = np.searchsorted(xa, pooled, side="right") / n
    cdf_b = np.searchsorted(xb, pooled, side="right") / m
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    lam = d * math.sqrt(n * m / (n + m))
    return KSReport(d, _kolmogorov_survival(lam), int(n), int(m))


def exponential_cdf(x: float) -> float:
    """Standard exponential cdf, the reference law for time-change residuals."""
    return 0.0 if x <= 0 else 1.0 - math.exp(-x)


# ---------------------------------------------------------------------------
# Uniform distance between step paths
# ---------------------------------------------------------------------------

def step_path_sup_distance(times_a: Sequence[float], values_a: Sequence[float],
                           times_b: Sequence[float], values_b: Sequence[float],
                           initial_a: float = 0.0,
                           initial_b: float = 0.0) -> float:
    """Sup-norm distance between two right-continuous step paths.

    Each path starts at its initial value and takes value values[i] from
    times[i] (inclusive) onward.  The supremum is over the union of
    breakpoints, which is exact for step paths.
    """
    ta = np.asarray(times_a, dtype=float)
    tb = np.asarray(times_b, dtype=float)
    va = np.asarray(values_a, dtype=float)
    vb = np.asarray(values_b, dtype=float)
    if ta.size != va.size or tb.size != vb.size:
        raise DomainError("times and values must have matching lengths")
    if np.any(np.diff(ta) < 0) or np.any(np.diff(tb) < 0):
        raise DomainError("breakpoint times must be ascending")

    sup = abs(initial_a - initial_b)
    i = j = 0
    cur_a, cur_b = initial_a, initial_b
    while i < ta.size or j < tb.size:
        t_next_a = ta[i] if i < ta.size else math.inf
        t_next_b = tb[j] if j < tb.size else math.inf
        t = min(t_next_a, t_next_b)
        while i < ta.size and ta[i] == t:
            cur_a = va[i]
            i += 1
        while j < tb.size and tb[j] == t:
            cur_b = vb[j]
            j += 1
        sup = max(sup, abs(cur_a - cur_b))
    return float(sup)
