import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from femeta.errors import AssumptionViolated
from femeta.weights import (
    WeightProblem,
    assumption_holds,
    closed_form_weights,
    correction_factors,
    kkt_check,
    linear_system_weights,
    minimize_on_simplex,
    objective,
    project_simplex,
    solve,
    solve_qp,
    unnormalized_weights,
)

from oracles import (
    grid_search,
    mse_objective,
    random_interior_problem,
    random_violating_problem,
)


def test_phi_u_is_derived():
    p = WeightProblem((1.0, 2.0, 6.0), (1.0, 1.0, 1.0))
    assert p.phi_u == 3.0
    with pytest.raises(TypeError):
        WeightProblem((1.0, 2.0), (1.0, 1.0), 5.0)


@pytest.mark.parametrize("bad", [((1.0,), (1.0,)), ((1.0, 2.0), (1.0, 0.0)), ((1.0, 2.0), (1.0,))])
def test_problem_validation(bad):
    with pytest.raises(ValueError):
        WeightProblem(*bad)


def test_assumption_all_equal_theta():
    assert assumption_holds(WeightProblem((2.0, 2.0, 2.0), (1.0, 5.0, 9.0)))


def test_assumption_k2_always_holds_on_grid():
    vals = [-100.0, -3.0, 0.0, 0.5, 7.0, 1e3]
    sig = [1e-4, 0.1, 1.0, 10.0, 1e4]
    for t1, t2, s1, s2 in itertools.product(vals, vals, sig, sig):
        assert assumption_holds(WeightProblem((t1, t2), (s1, s2)))


def test_assumption_direct_evaluation_k3():
    # c_i = 1 + sum_j (theta_j - theta_i)(theta_j - phi_u) / sigma2_j, evaluated literally
    theta, s2 = (0.0, 0.0, 100.0), (1.0, 1.0, 1.0)
    phi = sum(theta) / 3
    direct = [1 + sum((theta[j] - theta[i]) * (theta[j] - phi) / s2[j] for j in range(3)) for i in range(3)]
    np.testing.assert_allclose(correction_factors(WeightProblem(theta, s2)), direct, rtol=1e-12)
    assert assumption_holds(WeightProblem(theta, s2))  # all three factors equal 6667

    theta, s2 = (0.0, 1.0, 10.0), (1.0, 1.0, 100.0)
    phi = sum(theta) / 3
    direct = [1 + sum((theta[j] - theta[i]) * (theta[j] - phi) / s2[j] for j in range(3)) for i in range(3)]
    np.testing.assert_allclose(correction_factors(WeightProblem(theta, s2)), direct, rtol=1e-12)
    assert direct[0] < 0
    assert not assumption_holds(WeightProblem(theta, s2))


@settings(max_examples=200)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_k2_closed_form_matches_two_study_expression(t1, t2, s1, s2):
    w = unnormalized_weights(WeightProblem((t1, t2), (s1, s2)))
    extra = (t1 - t2) ** 2 / (2 * s1 * s2)
    np.testing.assert_allclose(w, [1 / s1 + extra, 1 / s2 + extra], rtol=1e-9)


@settings(max_examples=200)
@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3),
       st.lists(st.floats(1e-2, 1e2), min_size=3, max_size=3))
def test_k3_closed_form_matches_three_study_expression(th, s):
    t1, t2, t3 = th
    a, b, c = s
    expected = [
        1 / a + (t1 - t2) * (t1 + t3 - 2 * t2) / (3 * a * b) + (t1 - t3) * (t1 + t2 - 2 * t3) / (3 * a * c),
        1 / b + (t2 - t1) * (t2 + t3 - 2 * t1) / (3 * a * b) + (t2 - t3) * (t1 + t2 - 2 * t3) / (3 * b * c),
        1 / c + (t3 - t1) * (t2 + t3 - 2 * t1) / (3 * a * c) + (t3 - t2) * (t1 + t3 - 2 * t2) / (3 * b * c),
    ]
    got = unnormalized_weights(WeightProblem(th, s))
    scale = max(abs(x) for x in expected) + 1
    np.testing.assert_allclose(got, expected, atol=1e-9 * scale, rtol=1e-9)


def test_closed_form_equal_theta_is_inverse_variance():
    sol = closed_form_weights(WeightProblem((3.0, 3.0), (1.0, 4.0)))
    np.testing.assert_allclose(sol.w, [0.8, 0.2], atol=1e-15)
    assert sol.provenance == "closed_form"
    assert sol.kkt_residual < 1e-10


def test_closed_form_refuses_boundary_problem():
    with pytest.raises(AssumptionViolated):
        closed_form_weights(WeightProblem((0.0, 1.0, 10.0), (1.0, 1.0, 100.0)))
    with pytest.raises(AssumptionViolated):
        linear_system_weights(WeightProblem((0.0, 1.0, 10.0), (1.0, 1.0, 100.0)))


def test_linear_system_trivial_cases():
    np.testing.assert_allclose(linear_system_weights(WeightProblem((1.0, 1.0, 1.0), (1.0, 2.0, 4.0))),
                               np.array([4, 2, 1]) / 7, atol=1e-15)
    np.testing.assert_allclose(linear_system_weights(WeightProblem((0.0, 1.0), (1.0, 1.0))), [0.5, 0.5])
    np.testing.assert_allclose(closed_form_weights(WeightProblem((0.0, 1.0), (1.0, 1.0))).w, [0.5, 0.5])


def test_linear_system_matches_closed_form_random_k3():
    rng = np.random.default_rng(11)
    for _ in range(50):
        theta, s2 = random_interior_problem(rng, 3)
        p = WeightProblem(theta, s2)
        np.testing.assert_allclose(linear_system_weights(p), closed_form_weights(p).w, atol=1e-9)


def test_qp_equals_closed_form_interior():
    rng = np.random.default_rng(3)
    for k in (2, 3, 4, 6):
        for _ in range(20):
            p = WeightProblem(*random_interior_problem(rng, k))
            sol = solve_qp(p)
            assert sol.provenance == "qp_solver"
            np.testing.assert_allclose(sol.w, closed_form_weights(p).w, atol=1e-9)


def test_qp_zero_theta_is_inverse_variance():
    s2 = np.array([0.5, 2.0, 3.0, 10.0])
    sol = solve_qp(WeightProblem((0.0,) * 4, s2))
    np.testing.assert_allclose(sol.w, (1 / s2) / np.sum(1 / s2), atol=1e-12)


def test_qp_boundary_case_against_grid():
    theta, s2 = (0.0, 1.0, 10.0), (1.0, 1.0, 100.0)
    sol = solve_qp(WeightProblem(theta, s2))
    assert sol.active_set == (0,)
    assert sol.w[0] == 0.0
    best, _ = grid_search(theta, s2, 1e-3)
    assert sol.objective <= best + 1e-12
    assert sol.kkt_residual <= 1e-8
    assert sum(sol.w) == pytest.approx(1.0, abs=1e-12)


def test_solve_dispatch():
    assert solve(WeightProblem((0.0, 1.0), (1.0, 2.0))).provenance == "closed_form"
    assert solve(WeightProblem((0.0, 1.0, 10.0), (1.0, 1.0, 100.0))).provenance == "qp_solver"


def test_kkt_residuals():
    p = WeightProblem((0.0, 2.0, 5.0), (1.0, 3.0, 0.5))
    assert kkt_check(p, closed_form_weights(p).w) < 1e-10
    assert kkt_check(p, np.full(3, 1 / 3)) > 1e-3


def test_kkt_qp_on_ding_problem():
    import math

    y = [(math.log(0.19) + math.log(0.43)) / 2, (math.log(0.78) + math.log(1.12)) / 2]
    z = 1.959963984540054
    v = [((math.log(0.43 / 0.19)) / (2 * z)) ** 2, ((math.log(1.12 / 0.78)) / (2 * z)) ** 2]
    sol = solve_qp(WeightProblem(y, v))
    assert kkt_check(WeightProblem(y, v), sol.w) < 1e-8


def test_objective_matches_expanded_form():
    rng = np.random.default_rng(5)
    for _ in range(20):
        theta, s2 = rng.normal(size=4), rng.uniform(0.1, 3, 4)
        w = project_simplex(rng.normal(size=4))
        assert objective(WeightProblem(theta, s2), w) == pytest.approx(mse_objective(theta, s2, w), rel=1e-12, abs=1e-12)


def test_project_simplex_properties():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.normal(0, 3, rng.integers(1, 8))
        w = project_simplex(v)
        assert w.min() >= 0
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        # optimality: <v - w, u - w> <= 0 for vertices u
        for i in range(v.size):
            u = np.zeros(v.size)
            u[i] = 1
            assert (v - w) @ (u - w) <= 1e-10


@settings(max_examples=100)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(0.01, 0.99))
def test_strict_convexity(k, seed, t):
    rng = np.random.default_rng(seed)
    theta, s2 = rng.normal(0, 3, k), rng.uniform(0.1, 5, k)
    p = WeightProblem(theta, s2)
    w = project_simplex(rng.normal(size=k))
    ws = solve(p).as_array()
    if np.allclose(w, ws):
        return
    lhs = objective(p, (1 - t) * w + t * ws)
    rhs = (1 - t) * objective(p, w) + t * objective(p, ws)
    d = w - ws
    margin = t * (1 - t) * (np.sum(s2 * d * d) + (theta @ d) ** 2)
    assert lhs - (rhs - margin) == pytest.approx(0.0, abs=1e-12 * max(1.0, rhs))
    assert lhs < rhs


@settings(max_examples=100)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_scale_invariance_of_weights(k, seed, a):
    rng = np.random.default_rng(seed)
    theta, s2 = rng.normal(0, 2, k), rng.uniform(0.1, 5, k)
    p1 = WeightProblem(theta, s2)
    phi = theta.mean()
    p2 = WeightProblem(phi + a * (theta - phi), a * a * s2)
    np.testing.assert_allclose(solve(p1).w, solve(p2).w, atol=1e-9)


def test_qp_not_worse_than_grid_small_k():
    rng = np.random.default_rng(8)
    for k in (2, 3):
        for _ in range(15):
            theta, s2 = rng.normal(0, 3, k), rng.uniform(0.1, 2, k) ** 2
            sol = solve_qp(WeightProblem(theta, s2))
            assert sol.objective <= grid_search(theta, s2, 1e-3)[0] + 1e-6
    for _ in range(5):
        theta, s2 = random_violating_problem(rng, 4)
        sol = solve_qp(WeightProblem(theta, s2))
        assert sol.objective <= grid_search(theta, s2, 1e-2)[0] + 1e-6


def test_mse_dominance_over_uniform():
    rng = np.random.default_rng(9)
    for _ in range(200):
        k = int(rng.integers(2, 6))
        p = WeightProblem(rng.normal(0, 4, k), rng.uniform(0.05, 5, k))
        assert solve(p).objective <= objective(p, np.full(k, 1 / k)) + 1e-12


def test_generic_simplex_minimizer_diag():
    d = np.array([1.0, 2.0, 4.0])
    w, r, _ = minimize_on_simplex(np.diag(d), polish=False)
    np.testing.assert_allclose(w, (1 / d) / np.sum(1 / d), atol=1e-10)
    assert r <= 1e-10
