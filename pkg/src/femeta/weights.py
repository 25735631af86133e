"""MSE-optimal weights for estimating the unweighted average effect.

For study effects ``theta`` and variances ``sigma2`` the weighted estimator
``sum(w * y)`` with ``w`` on the probability simplex has mean squared error

    f(w) = sum(w**2 * sigma2) + (sum(w * theta) - phi_u)**2

where ``phi_u = mean(theta)``.  ``f`` is strictly convex, so the minimizer is
unique.  When every correction factor

    c_i = 1 + sum_j (theta_j - theta_i) * (theta_j - phi_u) / sigma2_j

is positive the minimizer is interior and has the closed form
``w_i ∝ c_i / sigma2_i``.  Otherwise some weights hit zero and the problem
is solved numerically by projected gradient descent, then certified by a
KKT residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolated, SingularMatrix, SolverDiverged

__all__ = [
    "WeightProblem",
    "WeightSolution",
    "correction_factors",
    "assumption_holds",
    "unnormalized_weights",
    "closed_form_weights",
    "linear_system_weights",
    "objective",
    "kkt_check",
    "project_simplex",
    "minimize_on_simplex",
    "solve_qp",
    "solve",
]

ZERO_TOL = 1e-12
CLAMP_TOL = 1e-14
KKT_TARGET = 1e-10
KKT_ACCEPT = 1e-8
MAX_ITER = 10_000


@dataclass(frozen=True)
class WeightProblem:
    """Optimization data for one weight solve.

    ``phi_u`` is always derived from ``theta``; it cannot be passed in.
    """

    theta: tuple[float, ...]
    sigma2: tuple[float, ...]

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta)
        sigma2 = tuple(float(s) for s in self.sigma2)
        if len(theta) != len(sigma2):
            raise ValueError("theta and sigma2 must have equal length")
        if len(theta) < 2:
            raise ValueError("a weight problem needs k >= 2 studies")
        if not all(s > 0 and math.isfinite(s) for s in sigma2):
            raise ValueError("all variances must be positive and finite")
        if not all(math.isfinite(t) for t in theta):
            raise ValueError("all effects must be finite")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma2", sigma2)

    @classmethod
    def from_sigma(cls, theta, sigma):
        return cls(tuple(theta), tuple(float(s) ** 2 for s in sigma))

    @property
    def k(self):
        return len(self.theta)

    @property
    def phi_u(self):
        return math.fsum(self.theta) / self.k

    def arrays(self):
        return np.asarray(self.theta, dtype=float), np.asarray(self.sigma2, dtype=float)

    def quadratic_form(self):
        """Matrix ``M`` with ``f(w) = w @ M @ w`` on the simplex."""
        theta, sigma2 = self.arrays()
        tc = theta - self.phi_u
        return np.diag(sigma2) + np.outer(tc, tc)


@dataclass(frozen=True)
class WeightSolution:
    w: tuple[float, ...]
    objective: float
    provenance: str  # "closed_form" | "qp_solver"
    kkt_residual: float
    active_set: tuple[int, ...] = field(default_factory=tuple)
    iterations: int = 0

    @property
    def interior(self):
        return not self.active_set

    def as_array(self):
        return np.asarray(self.w, dtype=float)


def correction_factors(problem: WeightProblem) -> np.ndarray:
    theta, sigma2 = problem.arrays()
    centred = theta - problem.phi_u
    # sum_j (theta_j - theta_i) * centred_j / sigma2_j, expanded to stay O(k)
    s1 = np.sum(theta * centred / sigma2)
    s0 = np.sum(centred / sigma2)
    return 1.0 + s1 - theta * s0


def assumption_holds(problem: WeightProblem) -> bool:
    """True when every correction factor is strictly positive."""
    return bool(np.all(correction_factors(problem) > 0))


def unnormalized_weights(problem: WeightProblem) -> np.ndarray:
    """``c_i / sigma2_i``; only meaningful when :func:`assumption_holds`."""
    _, sigma2 = problem.arrays()
    return correction_factors(problem) / sigma2


def objective(problem: WeightProblem, w) -> float:
    """Mean squared error of ``sum(w * y)`` as an estimator of ``phi_u``."""
    theta, sigma2 = problem.arrays()
    w = np.asarray(w, dtype=float)
    bias = float(np.dot(w, theta - problem.phi_u))
    return float(np.sum(w * w * sigma2)) + bias * bias


def gradient(problem: WeightProblem, w) -> np.ndarray:
    theta, sigma2 = problem.arrays()
    w = np.asarray(w, dtype=float)
    return 2.0 * sigma2 * w + 2.0 * theta * (np.dot(w, theta) - problem.phi_u)


def _residual(g, w, free):
    """Max-norm KKT residual from a gradient and a simplex point.

    Gradient-based terms are measured relative to ``max(1, |g|_inf)`` so the
    certificate does not depend on the units of the effects.
    """
    scale = max(1.0, float(np.max(np.abs(g))))
    lam = float(np.mean(g[free]))
    mu = np.where(free, 0.0, g - lam)
    stationarity = np.max(np.abs(g[free] - lam)) / scale
    dual = max(0.0, float(-np.min(mu))) / scale
    slack = float(np.max(np.abs(mu * w))) / scale
    primal = max(abs(float(np.sum(w)) - 1.0), max(0.0, float(-np.min(w))))
    return max(stationarity, dual, slack, primal)


def kkt_check(problem: WeightProblem, w) -> float:
    """KKT residual of a simplex point for the weight problem.

    Multipliers are recovered by least squares: the equality multiplier is
    the mean gradient over the free set, bound multipliers are the leftover
    gradient on the active set.  Returns the largest violation among
    stationarity, dual feasibility, complementary slackness and primal
    feasibility.
    """
    w = np.asarray(w, dtype=float)
    free = w > ZERO_TOL
    if not free.any():
        return math.inf
    return _residual(gradient(problem, w), w, free)


def _clamp(w):
    w = np.asarray(w, dtype=float)
    if np.any(w < -CLAMP_TOL):
        raise SolverDiverged(f"weight below -{CLAMP_TOL:g}: {w.min()!r}")
    w = np.where(w < 0, 0.0, w)
    return w / w.sum()


def _solution(problem, w, provenance, iterations=0):
    w = _clamp(w)
    active = tuple(int(i) for i in np.flatnonzero(w <= ZERO_TOL))
    w = np.where(w <= ZERO_TOL, 0.0, w)
    w = w / w.sum()
    return WeightSolution(
        w=tuple(float(x) for x in w),
        objective=objective(problem, w),
        provenance=provenance,
        kkt_residual=float(kkt_check(problem, w)),
        active_set=active,
        iterations=iterations,
    )


def closed_form_weights(problem: WeightProblem) -> WeightSolution:
    if not assumption_holds(problem):
        raise AssumptionViolated("some correction factor is not positive; use solve_qp")
    w = unnormalized_weights(problem)
    return _solution(problem, w / w.sum(), "closed_form")


def linear_system_weights(problem: WeightProblem) -> np.ndarray:
    """Interior optimal weights from the k x k stationarity system ``A w = B``.

    Row ``i`` reads ``a_i b_i sum_j theta_j w_j - w_i = a_i b_i phi_u - a_i``
    with ``a_i = sigma2_i^-1 / sum_j sigma2_j^-1`` and
    ``b_i = sum_j (theta_j - theta_i) / sigma2_j``.
    """
    if not assumption_holds(problem):
        raise AssumptionViolated("no interior solution; the linear system does not apply")
    theta, sigma2 = problem.arrays()
    prec = 1.0 / sigma2
    a = prec / prec.sum()
    b = np.sum(prec * theta) - theta * prec.sum()
    ab = a * b
    A = np.outer(ab, theta) - np.eye(problem.k)
    B = ab * problem.phi_u - a
    if np.linalg.cond(A) > 1e14:
        raise SingularMatrix("stationarity system is numerically singular")
    try:
        return np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{w : w >= 0, sum(w) = 1}``."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _polish(M, support):
    """Exact minimizer of ``w @ M @ w`` over the face spanned by ``support``."""
    sub = M[np.ix_(support, support)]
    try:
        x = np.linalg.solve(sub, np.ones(len(support)))
    except np.linalg.LinAlgError:
        return None
    if not np.all(x > 0):
        return None
    w = np.zeros(M.shape[0])
    w[support] = x / x.sum()
    return w


def minimize_on_simplex(M, w0=None, tol=KKT_TARGET, max_iter=MAX_ITER, polish=True):
    """Minimize ``w @ M @ w`` over the probability simplex.

    Projected gradient with Barzilai-Borwein steps and a non-monotone
    safeguard.  With ``polish`` the current support is re-solved exactly
    every iteration, which turns the descent into a finite active-set
    identification.  ``M`` must be symmetric positive definite.

    Returns ``(w, residual, iterations)``.
    """
    M = np.asarray(M, dtype=float)
    k = M.shape[0]

    def f(w):
        return float(w @ M @ w)

    def grad(w):
        return 2.0 * (M @ w)

    def resid(w):
        free = w > ZERO_TOL
        return _residual(grad(w), w, free)

    w = project_simplex(np.full(k, 1.0 / k) if w0 is None else w0)
    g = grad(w)
    step = 1.0 / (2.0 * np.linalg.norm(M, 2))
    history = [f(w)]
    best_w, best_r = w, resid(w)
    it = 0
    for it in range(1, max_iter + 1):
        direction = project_simplex(w - step * g) - w
        # non-monotone Armijo backtracking along the projected direction
        fref = max(history[-10:])
        slope = float(g @ direction)
        t = 1.0
        while True:
            cand = w + t * direction
            if f(cand) <= fref + 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        w_new = project_simplex(cand)
        g_new = grad(w_new)
        s, yv = w_new - w, g_new - g
        sy = float(s @ yv)
        step = float(s @ s) / sy if sy > 0 else step
        w, g = w_new, g_new
        history.append(f(w))

        r = resid(w)
        if r < best_r:
            best_w, best_r = w, r
        if polish:
            support = np.flatnonzero(w > ZERO_TOL)
            wp = _polish(M, support)
            if wp is not None:
                rp = resid(wp)
                if rp < best_r:
                    best_w, best_r = wp, rp
        if best_r <= tol or not np.any(s):
            break
    return best_w, best_r, it


def solve_qp(problem: WeightProblem, tol=KKT_TARGET, max_iter=MAX_ITER) -> WeightSolution:
    """Certified numerical minimizer of the weight problem.

    Raises
    ------
    SolverDiverged
        If the KKT residual is still above 1e-8 after ``max_iter`` iterations.
    """
    theta, sigma2 = problem.arrays()
    prec = 1.0 / sigma2
    w, _, iters = minimize_on_simplex(problem.quadratic_form(), w0=prec / prec.sum(),
                                      tol=tol, max_iter=max_iter)
    sol = _solution(problem, w, "qp_solver", iters)
    if not sol.kkt_residual <= KKT_ACCEPT:
        raise SolverDiverged(f"KKT residual {sol.kkt_residual:.3e} after {iters} iterations")
    return sol


def solve(problem: WeightProblem) -> WeightSolution:
    """Closed form when the positivity condition holds, QP otherwise."""
    if assumption_holds(problem):
        return closed_form_weights(problem)
    return solve_qp(problem)
