"""Independent reference computations used by the tests.

Nothing here imports the package under test.
"""
import itertools

import mpmath
import numpy as np


def normal_quantile(p, dps=40):
    with mpmath.workdps(dps):
        return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


def paule_mandel_root(y, v, dps=40):
    """Root of the generalized Q equation, solved in high precision."""
    y = [mpmath.mpf(x) for x in y]
    v = [mpmath.mpf(x) for x in v]
    k = len(y)

    def q(t):
        w = [1 / (vi + t) for vi in v]
        mu = sum(wi * yi for wi, yi in zip(w, y)) / sum(w)
        return sum(wi * (yi - mu) ** 2 for wi, yi in zip(w, y)) - (k - 1)

    with mpmath.workdps(dps):
        if q(0) <= 0:
            return 0.0
        hi = mpmath.mpf(1)
        while q(hi) > 0:
            hi *= 2
        return float(mpmath.findroot(q, (mpmath.mpf(0), hi), solver="anderson"))


def mse_objective(theta, sigma2, w):
    """Expanded MSE: sum w^2 s^2 + (sum w theta)^2 - 2 phi sum w theta + phi^2."""
    theta = np.asarray(theta, float)
    sigma2 = np.asarray(sigma2, float)
    w = np.asarray(w, float)
    phi = theta.mean()
    s = w @ theta
    return float(np.sum(w**2 * sigma2) + s**2 - 2 * phi * s + phi**2)


_GRIDS = {}


def simplex_grid(k, resolution):
    key = (k, resolution)
    if key not in _GRIDS:
        n = int(round(1 / resolution))
        if k == 2:
            a = np.arange(n + 1)
            pts = np.stack([a, n - a], axis=1)
        elif k == 3:
            i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
            mask = i + j <= n
            i, j = i[mask], j[mask]
            pts = np.stack([i, j, n - i - j], axis=1)
        else:
            pts = np.array([c + (n - sum(c),) for c in itertools.product(range(n + 1), repeat=k - 1)
                            if sum(c) <= n])
        _GRIDS[key] = pts / n
    return _GRIDS[key]


def grid_search(theta, sigma2, resolution=1e-3):
    """Best objective value and point over a regular simplex grid."""
    theta = np.asarray(theta, float)
    sigma2 = np.asarray(sigma2, float)
    W = simplex_grid(len(theta), resolution)
    tc = theta - theta.mean()
    f = (W**2) @ sigma2 + (W @ tc) ** 2
    i = int(np.argmin(f))
    return float(f[i]), W[i]


def _project_bisect(v, iters=200):
    """Simplex projection by bisection on the shift (no sorting)."""
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0).sum() > 1:
            lo = mid
        else:
            hi = mid
    w = np.maximum(v - 0.5 * (lo + hi), 0)
    return w / w.sum()


def minimize_diag_quadratic(d, iters=20000):
    """Plain projected gradient for sum(d_i w_i^2) on the simplex."""
    d = np.asarray(d, float)
    step = 1.0 / (2 * d.max())
    w = np.full(d.size, 1.0 / d.size)
    for _ in range(iters):
        w_new = _project_bisect(w - step * 2 * d * w)
        if np.max(np.abs(w_new - w)) < 1e-16:
            w = w_new
            break
        w = w_new
    return w


def random_interior_problem(rng, k):
    while True:
        theta = rng.normal(0, 2, k)
        sigma2 = rng.uniform(0.2, 4.0, k)
        c = 1 + np.array([np.sum((theta - theta[i]) * (theta - theta.mean()) / sigma2) for i in range(k)])
        if np.all(c > 1e-3):
            return theta, sigma2


def random_violating_problem(rng, k):
    while True:
        theta = rng.normal(0, 3, k)
        sigma2 = rng.uniform(0.1, 2.0, k) ** 2
        c = 1 + np.array([np.sum((theta - theta[i]) * (theta - theta.mean()) / sigma2) for i in range(k)])
        if np.any(c <= 0):
            return theta, sigma2
