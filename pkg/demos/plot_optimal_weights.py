"""
Minimum-MSE weights for the unweighted average effect
======================================================

With fixed but unequal study effects the plain average of the effects is a
natural target.  Weighting studies to minimise mean squared error for that
target gives a closed form whenever a positivity condition holds, and a
small quadratic program on the simplex otherwise.
"""
import numpy as np

from femeta.weights import (
    WeightProblem,
    assumption_holds,
    closed_form_weights,
    correction_factors,
    linear_system_weights,
    objective,
    solve,
    solve_qp,
)

###############################################################################
# An interior problem: all three correction factors are positive, so the
# closed form, the linear system and the iterative solver coincide.
p = WeightProblem(theta=(0.0, 2.0, 5.0), sigma2=(1.0, 3.0, 0.5))
print("correction factors", correction_factors(p))
print("closed form ", closed_form_weights(p).w)
print("linear system", linear_system_weights(p))
print("simplex QP  ", solve_qp(p).w)

###############################################################################
# A boundary problem: the first study sits far from the average of the
# others and is precise, so its correction factor is negative.  The closed
# form would give it a negative weight; the constrained optimum drops it.
q = WeightProblem(theta=(0.0, 1.0, 10.0), sigma2=(1.0, 1.0, 100.0))
print("condition holds:", assumption_holds(q))
sol = solve(q)
print(sol.provenance, sol.w, "active set", sol.active_set, "KKT residual %.1e" % sol.kkt_residual)

###############################################################################
# The optimum never does worse than equal weights, which are always feasible.
rng = np.random.default_rng(1)
gains = []
for _ in range(1000):
    k = int(rng.integers(2, 6))
    prob = WeightProblem(rng.normal(0, 3, k), rng.uniform(0.1, 4, k))
    gains.append(objective(prob, np.full(k, 1 / k)) - solve(prob).objective)
print("smallest MSE gain over equal weights: %.3g" % min(gains))
