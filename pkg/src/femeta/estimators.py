"""Pooled estimators for the common-, random- and fixed-effects models."""
from __future__ import annotations

import enum
import math

import numpy as np

from . import weights as qp
from .core import (
    Dataset,
    PooledResult,
    critical_value,
    require_pooling,
)
from .errors import NonInteriorSolution

__all__ = [
    "Tau2Method",
    "tau2",
    "common_effect",
    "random_effects",
    "fixed_unweighted",
    "fixed_weighted",
    "fixed_optimal",
    "alpha_decomposition",
    "pool",
    "plugin_problem",
]

PM_TOL = 1e-10
PM_MAX_ITER = 200


class Tau2Method(str, enum.Enum):
    DERSIMONIAN_LAIRD = "dersimonian_laird"
    PAULE_MANDEL = "paule_mandel"

    @classmethod
    def parse(cls, value):
        aliases = {"dl": cls.DERSIMONIAN_LAIRD, "pm": cls.PAULE_MANDEL}
        if isinstance(value, cls):
            return value
        return aliases.get(str(value).lower()) or cls(str(value).lower())

    @property
    def short(self):
        return "DL" if self is Tau2Method.DERSIMONIAN_LAIRD else "PM"


def _weighted_mean(w, y):
    return math.fsum(w * y) / math.fsum(w)


def _result(model, estimate, variance, w, level, **extra):
    z = critical_value(level)
    half = z * math.sqrt(variance)
    w = np.asarray(w, dtype=float)
    w = w / math.fsum(w)
    return PooledResult(
        model=model,
        estimate=float(estimate),
        variance=float(variance),
        ci_low=float(estimate - half),
        ci_high=float(estimate + half),
        level=level,
        weights=tuple(float(x) for x in w),
        **extra,
    )


def generalized_q(y, v, tau2_value):
    """``sum((y - mu(tau2))**2 / (v + tau2))`` with ``mu`` the matching weighted mean."""
    w = 1.0 / (v + tau2_value)
    mu = _weighted_mean(w, y)
    return math.fsum(w * (y - mu) ** 2)


def _tau2_dl(y, v):
    w = 1.0 / v
    sw = math.fsum(w)
    Q = generalized_q(y, v, 0.0)
    denom = sw - math.fsum(w * w) / sw
    return max(0.0, (Q - (len(y) - 1)) / denom)


def _tau2_pm(y, v, tol=PM_TOL, max_iter=PM_MAX_ITER):
    df = len(y) - 1
    if generalized_q(y, v, 0.0) <= df:
        return 0.0
    # generalized Q is decreasing in tau2 and <= 1 at the upper end
    lo, hi = 0.0, float(np.max((y - y.mean()) ** 2) * len(y))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if generalized_q(y, v, mid) > df:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def tau2(dataset: Dataset, method=Tau2Method.DERSIMONIAN_LAIRD) -> float:
    """Between-study variance estimate.

    ``dersimonian_laird`` is the method-of-moments estimate truncated at zero.
    ``paule_mandel`` solves ``generalized_q(tau2) = k - 1`` by bisection and
    returns 0 when the equation has no positive root.
    """
    require_pooling(dataset)
    method = Tau2Method.parse(method)
    y, v = dataset.y, dataset.var
    if method is Tau2Method.DERSIMONIAN_LAIRD:
        return _tau2_dl(y, v)
    return _tau2_pm(y, v)


def common_effect(dataset: Dataset, level=0.95) -> PooledResult:
    """Inverse-variance pooled estimate of a single shared effect."""
    require_pooling(dataset)
    w = 1.0 / dataset.var
    return _result("common", _weighted_mean(w, dataset.y), 1.0 / math.fsum(w), w, level)


def random_effects(dataset: Dataset, method=Tau2Method.DERSIMONIAN_LAIRD, level=0.95) -> PooledResult:
    """Random-effects mean with weights ``1 / (var + tau2)``."""
    method = Tau2Method.parse(method)
    t2 = tau2(dataset, method)
    w = 1.0 / (dataset.var + t2)
    return _result("random", _weighted_mean(w, dataset.y), 1.0 / math.fsum(w), w, level,
                   tau2=t2, tau2_method=method.value)


def fixed_unweighted(dataset: Dataset, level=0.95) -> PooledResult:
    """Plain mean of the observed effects with variance ``sum(var) / k**2``."""
    require_pooling(dataset)
    k = dataset.k
    return _result("fixed-unweighted", math.fsum(dataset.y) / k, math.fsum(dataset.var) / k**2,
                   np.full(k, 1.0 / k), level)


def fixed_weighted(dataset: Dataset, level=0.95) -> PooledResult:
    """Weighted average effect; numerically the common-effect estimator."""
    res = common_effect(dataset, level)
    return _result("fixed-weighted", res.estimate, res.variance, res.weights, level)


def plugin_problem(dataset: Dataset) -> qp.WeightProblem:
    """Weight problem with the observed effects standing in for the true ones."""
    return qp.WeightProblem(tuple(dataset.y), tuple(dataset.var))


def fixed_optimal(dataset: Dataset, level=0.95) -> PooledResult:
    """MSE-optimal weighted estimator of the unweighted average effect.

    The optimal weights depend on the unknown study effects; the observed
    effects are plugged in.  If the positivity condition fails the weights
    come from the constrained solve and ``active_set`` lists the studies
    that were dropped.
    """
    require_pooling(dataset)
    sol = qp.solve(plugin_problem(dataset))
    w = sol.as_array()
    v = dataset.var
    sw = math.fsum(w)
    estimate = _weighted_mean(w, dataset.y)
    variance = math.fsum((w * w) * v) / sw**2
    return _result("fixed-optimal", estimate, variance, w, level,
                   solver=sol.provenance, active_set=sol.active_set)


def alpha_decomposition(dataset: Dataset, check_tol=1e-10):
    """Split the optimal estimate into weighted and unweighted averages.

    Returns ``(alpha, phi_w, phi_u)`` such that the optimal estimate equals
    ``alpha * phi_w + (1 - alpha) * phi_u`` where
    ``alpha = sum(1 / var) / sum(unnormalized optimal weights)``.
    """
    require_pooling(dataset)
    problem = plugin_problem(dataset)
    if not qp.assumption_holds(problem):
        raise NonInteriorSolution("decomposition requires an interior optimal solution")
    wf = qp.unnormalized_weights(problem)
    prec = 1.0 / dataset.var
    alpha = math.fsum(prec) / math.fsum(wf)
    phi_w = _weighted_mean(prec, dataset.y)
    phi_u = math.fsum(dataset.y) / dataset.k
    combined = alpha * phi_w + (1.0 - alpha) * phi_u
    optimal = _weighted_mean(wf, dataset.y)
    scale = max(1.0, abs(optimal), float(np.max(np.abs(dataset.y))))
    if abs(combined - optimal) > check_tol * scale:
        raise ArithmeticError(f"alpha identity failed: {combined!r} != {optimal!r}")
    return alpha, phi_w, phi_u


def pool(dataset: Dataset, model: str, level=0.95, tau2_method=Tau2Method.DERSIMONIAN_LAIRD) -> PooledResult:
    """Dispatch on a model tag (see :data:`femeta.core.MODELS`)."""
    if model == "common":
        return common_effect(dataset, level)
    if model == "random":
        return random_effects(dataset, tau2_method, level)
    if model == "fixed-unweighted":
        return fixed_unweighted(dataset, level)
    if model == "fixed-weighted":
        return fixed_weighted(dataset, level)
    if model == "fixed-optimal":
        return fixed_optimal(dataset, level)
    raise ValueError(f"unknown model {model!r}")
