"""Bias/variance/MSE comparison of the unbiased and optimal estimators.

Reports are available in closed form (``analytic_report``) and by Monte
Carlo (``monte_carlo_report``).  Monte Carlo draws come from a Philox
counter-based generator keyed by ``(seed, block)``, so a run split across
workers reproduces the serial run bit for bit.  Aggregation uses
``math.fsum``, which is exactly rounded and therefore order-insensitive.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import weights as qp
from .core import critical_value, make_dataset
from .errors import InvalidAxis
from .estimators import fixed_optimal

__all__ = [
    "Scenario",
    "EstimatorReport",
    "GridRow",
    "STANDARD_GRIDS",
    "analytic_report",
    "monte_carlo_report",
    "run_grid",
    "run_standard_grid",
    "grid_values",
    "coverage_study",
    "rows_to_csv",
    "block_generator",
]

ESTIMATORS = ("unbiased", "optimal")
AXES = ("difference_d", "ratio_r")
BLOCK = 8192


@dataclass(frozen=True)
class Scenario:
    theta: tuple[float, ...]
    sigma: tuple[float, ...]  # standard deviations, not variances
    replicates: int = 10_000
    seed: int = 0

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        sigma = tuple(float(s) for s in self.sigma)
        if len(theta) != len(sigma):
            raise ValueError("theta and sigma must have equal length")
        if not all(s > 0 for s in sigma):
            raise ValueError("sigma must be positive")
        if int(self.replicates) < 1:
            raise ValueError("replicates must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "replicates", int(self.replicates))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def k(self):
        return len(self.theta)

    @property
    def phi_u(self):
        return math.fsum(self.theta) / self.k

    @property
    def sigma2(self):
        return np.asarray(self.sigma) ** 2

    def problem(self):
        return qp.WeightProblem.from_sigma(self.theta, self.sigma)


@dataclass(frozen=True)
class EstimatorReport:
    estimator: str
    mse: float
    bias2: float
    variance: float
    method: str
    mse_se: float = 0.0
    replicates: int = 0


@dataclass(frozen=True)
class GridRow:
    axis_value: float
    estimator: str
    mse: float
    bias2: float
    variance: float
    method: str


def _weights(scenario, estimator):
    if estimator == "unbiased":
        return np.full(scenario.k, 1.0 / scenario.k)
    if estimator == "optimal":
        return qp.solve(scenario.problem()).as_array()
    raise ValueError(f"unknown estimator {estimator!r}")


def analytic_report(scenario: Scenario, estimator: str) -> EstimatorReport:
    """Exact squared bias, variance and MSE with weights from true parameters."""
    w = _weights(scenario, estimator)
    theta = np.asarray(scenario.theta)
    sw = math.fsum(w)
    bias = math.fsum(w * theta) / sw - scenario.phi_u
    variance = math.fsum(w * w * scenario.sigma2) / sw**2
    bias2 = bias * bias
    return EstimatorReport(estimator, bias2 + variance, bias2, variance, "analytic")


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Independent stream for one replicate block."""
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(block) << 64)))


def _blocks(n):
    return [(b, min(BLOCK, n - b * BLOCK)) for b in range(-(-n // BLOCK))]


def draw_effects(scenario: Scenario, workers: int = 1) -> np.ndarray:
    """``replicates x k`` matrix of ``y_i ~ N(theta_i, sigma_i**2)``."""
    theta = np.asarray(scenario.theta)
    sigma = np.asarray(scenario.sigma)

    def one(spec):
        b, n = spec
        z = block_generator(scenario.seed, b).standard_normal((n, scenario.k))
        return theta + z * sigma

    specs = _blocks(scenario.replicates)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, specs))
    else:
        parts = [one(s) for s in specs]
    return np.vstack(parts)


def monte_carlo_report(scenario: Scenario, estimator: str, workers: int = 1) -> EstimatorReport:
    """Empirical squared bias, variance and MSE over ``scenario.replicates`` draws.

    ``variance`` is the population (divide-by-n) variance so that
    ``mse == bias2 + variance`` up to rounding.  ``mse_se`` is the Monte
    Carlo standard error of ``mse``.
    """
    w = _weights(scenario, estimator)
    w = w / w.sum()
    est = draw_effects(scenario, workers) @ w
    n = est.size
    phi = scenario.phi_u
    mean = math.fsum(est) / n
    sq = (est - phi) ** 2
    mse = math.fsum(sq) / n
    variance = math.fsum((est - mean) ** 2) / n
    bias2 = (mean - phi) ** 2
    se = float(np.std(sq, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return EstimatorReport(estimator, mse, bias2, variance, "monte_carlo", se, n)


def _mutate(base: Scenario, axis: str, value: float, index: int) -> Scenario:
    if axis == "difference_d":
        theta = list(base.theta)
        theta[index] = theta[0] + value
        return replace(base, theta=tuple(theta))
    if axis == "ratio_r":
        sigma = list(base.sigma)
        sigma[index] = sigma[0] * value
        return replace(base, sigma=tuple(sigma))
    raise InvalidAxis(f"axis must be one of {AXES}, got {axis!r}")


def run_grid(base: Scenario, axis: str, values: Sequence[float], method: str = "analytic",
             index: int = -1) -> list[GridRow]:
    """One unbiased/optimal report pair per axis value.

    ``difference_d`` sets ``theta[index] = theta[0] + d``; ``ratio_r`` sets
    ``sigma[index] = sigma[0] * r``.  ``method`` is ``"analytic"``,
    ``"monte_carlo"`` or ``"both"``.
    """
    if axis not in AXES:
        raise InvalidAxis(f"axis must be one of {AXES}, got {axis!r}")
    methods = {"analytic": ("analytic",), "monte_carlo": ("monte_carlo",),
               "both": ("analytic", "monte_carlo")}[method]
    rows = []
    for value in values:
        sc = _mutate(base, axis, float(value), index)
        for m in methods:
            for est in ESTIMATORS:
                rep = analytic_report(sc, est) if m == "analytic" else monte_carlo_report(sc, est)
                rows.append(GridRow(float(value), est, rep.mse, rep.bias2, rep.variance, m))
    return rows


# name -> (base scenario, axis, (start, stop))
STANDARD_GRIDS = {
    "k2-d": (Scenario(theta=(0.0, 0.0), sigma=(1.0, 2.0)), "difference_d", (0.0, 10.0)),
    "k2-r": (Scenario(theta=(-5.0, 5.0), sigma=(1.0, 1.0)), "ratio_r", (1.0, 10.0)),
    "k3-d": (Scenario(theta=(0.0, 5.0, 0.0), sigma=(1.0, 2.0, 3.0)), "difference_d", (0.0, 10.0)),
    "k3-r": (Scenario(theta=(-10.0, 0.0, 10.0), sigma=(1.0, 2.0, 1.0)), "ratio_r", (1.0, 10.0)),
}


def grid_values(start: float, stop: float, step: float = 0.25) -> np.ndarray:
    n = int(round((stop - start) / step)) + 1
    return np.linspace(start, stop, n)


def run_standard_grid(name: str, step: float = 0.25, method: str = "analytic",
                   replicates: int | None = None, seed: int | None = None) -> list[GridRow]:
    base, axis, (start, stop) = STANDARD_GRIDS[name]
    if replicates is not None:
        base = replace(base, replicates=replicates)
    if seed is not None:
        base = replace(base, seed=seed)
    return run_grid(base, axis, grid_values(start, stop, step), method)


def coverage_study(scenario: Scenario, model: str, level: float = 0.95, plugin: bool = False,
                   workers: int = 1) -> float:
    """Fraction of replicates whose interval covers the model's target.

    ``common`` targets the shared effect and needs all ``theta`` equal;
    ``fixed-unweighted`` and ``fixed-optimal`` target the unweighted average
    effect; ``fixed-weighted`` targets the inverse-variance weighted effect.
    ``fixed-optimal`` uses weights from the true parameters unless
    ``plugin`` is set, in which case each replicate re-solves with its own
    observed effects (slow).
    """
    Y = draw_effects(scenario, workers)
    theta = np.asarray(scenario.theta)
    s2 = scenario.sigma2
    z = critical_value(level)
    prec = 1.0 / s2
    if model in ("common", "fixed-weighted"):
        if model == "common":
            if np.ptp(theta) != 0:
                raise ValueError("the common-effect model needs equal theta")
            target = theta[0]
        else:
            target = float(np.sum(prec * theta) / prec.sum())
        est = Y @ (prec / prec.sum())
        half = np.full(len(est), z / math.sqrt(prec.sum()))
    elif model == "fixed-unweighted":
        target = scenario.phi_u
        est = Y.mean(axis=1)
        half = np.full(len(est), z * math.sqrt(s2.sum()) / scenario.k)
    elif model == "fixed-optimal":
        target = scenario.phi_u
        if plugin:
            est, half = np.empty(len(Y)), np.empty(len(Y))
            labels = [str(i) for i in range(scenario.k)]
            for r, row in enumerate(Y):
                res = fixed_optimal(make_dataset(row, s2, labels), level)
                est[r], half[r] = res.estimate, res.ci_high - res.estimate
        else:
            w = qp.solve(scenario.problem()).as_array()
            est = Y @ w
            half = np.full(len(est), z * math.sqrt(np.sum(w * w * s2)) / w.sum())
    else:
        raise ValueError(f"coverage not defined for model {model!r}")
    covered = (est - half <= target) & (target <= est + half)
    return float(np.count_nonzero(covered)) / len(est)


CSV_COLUMNS = ("axis_value", "estimator", "mse", "bias2", "variance", "method")


def rows_to_csv(rows: Sequence[GridRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([repr(r.axis_value), r.estimator, repr(r.mse), repr(r.bias2),
                         repr(r.variance), r.method])
    return buf.getvalue()
