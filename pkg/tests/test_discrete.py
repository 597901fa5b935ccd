import itertools
import math

import numpy as np
import pytest

from otmiss.discrete import (
    CostMatrix,
    Coupling,
    cost_matrix,
    coupling_edge_list,
    coupling_kl,
    implicit_cost,
    sensitivity_constants,
    sinkhorn,
    solve_exact_ot,
    write_coupling_csv,
)

from conftest import random_spd


def permutation_minimum(C):
    n = C.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, sum(C[i, perm[i]] for i in range(n)) / n)
    return best


def entropic_primal_projected_gradient(C, eps, iters=20_000):
    """Dense primal minimization by gradient descent projected onto the
    marginal-constraint subspace (the entropic optimum is interior, so the
    positivity constraints never bind)."""
    n, m = C.shape
    A = np.vstack([np.kron(np.eye(n), np.ones(m)), np.kron(np.ones(n), np.eye(m))])
    null_proj = np.eye(n * m) - A.T @ np.linalg.pinv(A @ A.T) @ A
    c = C.ravel()

    def f(x):
        return float(x @ c + eps * (x * np.log(x)).sum())

    x = np.full(n * m, 1.0 / (n * m))
    fx = f(x)
    for _ in range(iters):
        grad = null_proj @ (c + eps * (1.0 + np.log(x)))
        step = 1.0
        while True:
            cand = x - step * grad
            if cand.min() > 0:
                f_cand = f(cand)
                if f_cand <= fx - 1e-4 * step * (grad @ grad):
                    break
            step *= 0.5
            if step < 1e-18:
                return fx
        if fx - f_cand < 1e-14:
            return f_cand
        x, fx = cand, f_cand
    return fx


class TestCostMatrix:
    def test_zero_diagonal_when_equal(self, rng):
        X = rng.normal(size=(6, 3))
        cm = cost_matrix(X, X)
        assert np.allclose(np.diag(cm.entries), 0.0)

    def test_unit_square_distance(self):
        cm = cost_matrix(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]))
        assert cm.entries[0, 0] == pytest.approx(2.0)

    def test_matches_triple_loop(self, rng):
        X, Y = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
        M = random_spd(rng, 3)
        cm = cost_matrix(X, Y, M)
        for i in range(5):
            for j in range(4):
                diff = X[i] - Y[j]
                assert cm.entries[i, j] == pytest.approx(diff @ M @ diff, abs=1e-12)

    def test_extremes_cached(self, rng):
        cm = cost_matrix(rng.normal(size=(5, 2)), rng.normal(size=(6, 2)))
        assert cm.c_min == cm.entries.min() and cm.c_max == cm.entries.max()

    def test_non_psd_metric_rejected(self, rng):
        with pytest.raises(ValueError):
            cost_matrix(rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), np.diag([1.0, -1.0]))


class TestExactOt:
    def test_singleton(self):
        cm = CostMatrix(np.array([[3.5]]), np.eye(1))
        sol = solve_exact_ot(cm)
        assert sol.coupling.plan.tolist() == [[1.0]]
        assert sol.value == pytest.approx(3.5)

    def test_identity_matching_on_line(self):
        X = np.array([[0.0], [1.0]])
        sol = solve_exact_ot(cost_matrix(X, X))
        assert sol.value == pytest.approx(0.0, abs=1e-12)

    def test_permutation_oracle_square(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 7))
            C = rng.uniform(size=(n, n)) * 5
            sol = solve_exact_ot(CostMatrix(C, np.eye(1)))
            assert sol.converged
            assert sol.value == pytest.approx(permutation_minimum(C), abs=1e-9)
            sol.coupling.validate()

    def test_rectangular_against_cvxpy(self, rng):
        cvxpy = pytest.importorskip("cvxpy")
        n, m = 3, 5
        C = rng.uniform(size=(n, m))
        sol = solve_exact_ot(CostMatrix(C, np.eye(1)))
        P = cvxpy.Variable((n, m), nonneg=True)
        prob = cvxpy.Problem(
            cvxpy.Minimize(cvxpy.sum(cvxpy.multiply(P, C))),
            [cvxpy.sum(P, axis=1) == 1.0 / n, cvxpy.sum(P, axis=0) == 1.0 / m],
        )
        prob.solve()
        assert sol.value == pytest.approx(prob.value, abs=1e-7)
        sol.coupling.validate()

    def test_value_below_any_feasible_plan(self, rng):
        C = rng.uniform(size=(5, 5))
        cm = CostMatrix(C, np.eye(1))
        exact = solve_exact_ot(cm)
        entropic = sinkhorn(cm, 0.3)
        assert exact.value <= (entropic.coupling.plan * C).sum() + 1e-10


class TestSinkhorn:
    def test_singleton(self):
        cm = CostMatrix(np.array([[2.0]]), np.eye(1))
        sol = sinkhorn(cm, 1.0)
        assert sol.coupling.plan.tolist() == [[1.0]]
        assert sol.value == pytest.approx(2.0)
        assert sol.entropy == pytest.approx(0.0)

    def test_huge_eps_gives_uniform_plan(self, rng):
        # deviation from uniform scales as (1/nm) * cost interaction / eps
        C = rng.uniform(size=(6, 8)) + 4.0
        cm = CostMatrix(C, np.eye(1))
        sol = sinkhorn(cm, 1e4 * cm.c_max)
        assert np.max(np.abs(sol.coupling.plan - 1.0 / 48)) < 1e-6

    def test_marginal_feasibility(self, rng):
        for eps in (0.05, 0.5, 5.0):
            C = rng.uniform(size=(7, 5)) * 3
            sol = sinkhorn(CostMatrix(C, np.eye(1)), eps, tol=1e-9)
            assert sol.converged
            assert sol.coupling.marginal_violation() < 1e-8

    def test_dual_objective_monotone(self, rng):
        C = rng.uniform(size=(6, 6)) * 4
        sol = sinkhorn(CostMatrix(C, np.eye(1)), 0.2)
        assert np.all(np.diff(sol.dual_trace) >= -1e-9 * max(1.0, np.abs(sol.dual_trace).max()))

    def test_against_projected_gradient_primal(self, rng):
        C = rng.uniform(size=(4, 4)) * 2
        eps = 0.5
        sol = sinkhorn(CostMatrix(C, np.eye(1)), eps, tol=1e-11)
        oracle = entropic_primal_projected_gradient(C, eps)
        assert sol.value == pytest.approx(oracle, abs=5e-6)

    def test_value_decomposition_and_gap(self, rng):
        C = rng.uniform(size=(4, 4)) * 2
        cm = CostMatrix(C, np.eye(1))
        eps = 0.7
        sol = sinkhorn(cm, eps)
        exact = solve_exact_ot(cm)
        assert sol.value == pytest.approx(sol.transport_cost + eps * sol.entropy, abs=1e-12)
        # transport part dominates the exact optimum; plain value sits above
        # exact + eps * (plan entropy)
        assert sol.transport_cost >= exact.value - 1e-10
        assert sol.value >= exact.value + eps * sol.entropy - 1e-10

    def test_max_iter_flag(self, rng):
        C = rng.uniform(size=(5, 5))
        sol = sinkhorn(CostMatrix(C, np.eye(1)), 0.01, tol=1e-12, max_iter=3)
        assert not sol.converged
        assert sol.iterations == 3

    def test_rejects_bad_eps(self, rng):
        with pytest.raises(ValueError):
            sinkhorn(CostMatrix(rng.uniform(size=(2, 2)), np.eye(1)), 0.0)


class TestCouplingKl:
    def test_self_divergence_zero(self, rng):
        C = rng.uniform(size=(4, 4))
        sol = sinkhorn(CostMatrix(C, np.eye(1)), 1.0)
        assert coupling_kl(sol.coupling, sol.coupling) == 0.0

    def test_uniform_vs_sinkhorn_nonnegative(self, rng):
        C = rng.uniform(size=(5, 5))
        uniform = Coupling(np.full((5, 5), 1.0 / 25))
        sol = sinkhorn(CostMatrix(C, np.eye(1)), 0.5)
        assert coupling_kl(uniform, sol.coupling) >= 0.0

    def test_hand_computed_pair(self):
        p = Coupling(np.array([[0.5, 0.0], [0.0, 0.5]]))
        q = Coupling(np.array([[0.4, 0.1], [0.1, 0.4]]))
        assert coupling_kl(p, q) == pytest.approx(2 * 0.5 * np.log(0.5 / 0.4))

    def test_support_violation(self):
        p = Coupling(np.array([[0.5, 0.0], [0.0, 0.5]]))
        q = Coupling(np.array([[0.0, 0.5], [0.5, 0.0]]))
        with pytest.raises(ValueError):
            coupling_kl(p, q)


class TestImplicitCost:
    def test_full_observation_returns_plain_cost(self, rng):
        X, Y = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
        M = random_spd(rng, 3)
        plain = cost_matrix(X, Y, M)
        implicit = implicit_cost(X, Y, M, np.ones(3), np.ones(3))
        assert np.max(np.abs(implicit.entries - plain.entries)) < 1e-10

    def test_scalar_expectation(self, rng):
        # d = 1: E[(wx - w'y)^2] = p x^2 + q y^2 - 2 p q x y
        x, y, p, q = 1.3, -0.7, 0.6, 0.8
        out = implicit_cost(np.array([[x]]), np.array([[y]]), np.eye(1), [p], [q])
        assert out.entries[0, 0] == pytest.approx(p * x**2 + q * y**2 - 2 * p * q * x * y)

    def test_entries_match_mask_average(self, rng):
        n, m, d = 4, 3, 2
        X, Y = rng.normal(size=(n, d)) + 1, rng.normal(size=(m, d)) - 0.5
        M = random_spd(rng, d)
        p = np.array([0.5, 0.8])
        q = np.array([0.7, 0.4])
        reps = 4000
        acc = np.zeros((reps, n, m))
        for r in range(reps):
            wx = (rng.random((n, d)) < p).astype(float)
            wy = (rng.random((m, d)) < q).astype(float)
            acc[r] = cost_matrix(X * wx, Y * wy, M).entries
        se = acc.std(axis=0, ddof=1) / np.sqrt(reps)
        expected = implicit_cost(X, Y, M, p, q).entries
        assert np.all(np.abs(acc.mean(axis=0) - expected) < 4 * se + 1e-12)

    def test_argmin_matches_mask_average(self, rng):
        n = 5
        X, Y = rng.normal(size=(n, 2)) + 1, rng.normal(size=(n, 2)) - 1
        p, q = np.array([0.4, 0.9]), np.array([0.8, 0.5])
        reps = 3000
        acc = np.zeros((n, n))
        for r in range(reps):
            wx = (rng.random((n, 2)) < p).astype(float)
            wy = (rng.random((n, 2)) < q).astype(float)
            acc += cost_matrix(X * wx, Y * wy).entries
        mc_plan = solve_exact_ot(CostMatrix(acc / reps, np.eye(2))).coupling.plan
        ic_plan = solve_exact_ot(implicit_cost(X, Y, None, p, q)).coupling.plan
        assert np.array_equal(mc_plan > 0, ic_plan > 0)


class TestSensitivity:
    def test_constant_cost(self):
        cm = CostMatrix(np.full((3, 3), 2.0), np.eye(1))
        constants = sensitivity_constants(cm, 1.0)
        assert constants.log_k_eps == pytest.approx(2.0)
        assert constants.k_eps == pytest.approx(math.exp(2.0))

    def test_unit_interval_example(self):
        cm = CostMatrix(np.array([[0.0, 1.0]]), np.eye(1))
        assert sensitivity_constants(cm, 1.0).k_eps == pytest.approx(math.e**2)

    def test_overflow_guard(self):
        cm = CostMatrix(np.array([[0.0, 1e6]]), np.eye(1))
        constants = sensitivity_constants(cm, 1e-6)
        assert math.isinf(constants.k_eps)
        assert math.isfinite(constants.log_k_eps)

    def test_value_sensitivity_inequality(self, rng):
        eps = 1.0
        for _ in range(10):
            n = int(rng.integers(3, 7))
            C1 = rng.uniform(size=(n, n))
            C2 = C1 + rng.uniform(-0.05, 0.05, size=(n, n))
            C2 = np.clip(C2, 0, None)
            w1 = sinkhorn(CostMatrix(C1, np.eye(1)), eps).value
            w2 = sinkhorn(CostMatrix(C2, np.eye(1)), eps).value
            c_max = max(C1.max(), C2.max())
            c_min = min(C1.min(), C2.min())
            log_k = (2 * c_max - c_min) / eps
            bound = math.exp(log_k) / n * np.linalg.norm(C1 - C2)
            assert abs(w1 - w2) <= bound

    def test_plan_sensitivity_inequality(self, rng):
        eps = 1.0
        for _ in range(5):
            n = int(rng.integers(3, 6))
            C1 = rng.uniform(size=(n, n))
            C2 = np.clip(C1 + rng.uniform(-0.05, 0.05, size=(n, n)), 0, None)
            p1 = sinkhorn(CostMatrix(C1, np.eye(1)), eps, tol=1e-12).coupling
            p2 = sinkhorn(CostMatrix(C2, np.eye(1)), eps, tol=1e-12).coupling
            c_max, c_min = max(C1.max(), C2.max()), min(C1.min(), C2.min())
            k = math.exp((2 * c_max - c_min) / eps)
            k_prime = math.exp((3 * c_max - 7 * c_min) / (2 * eps))
            gap = np.linalg.norm(C1 - C2)
            bound = k / (eps * n) * gap + k_prime * math.sqrt(gap / (eps**2 * n))
            assert coupling_kl(p1, p2) <= bound

    def test_rejects_bad_eps(self, rng):
        with pytest.raises(ValueError):
            sensitivity_constants(CostMatrix(rng.uniform(size=(2, 2)), np.eye(1)), -1.0)


class TestCouplingExports:
    def test_edge_list_top_quarter(self):
        plan = np.array([[0.4, 0.1], [0.1, 0.4]])
        edges = coupling_edge_list(Coupling(plan), quantile=0.75)
        assert edges.shape == (2, 3)
        assert set(map(tuple, edges[:, :2].astype(int))) == {(0, 0), (1, 1)}

    def test_dense_csv(self, tmp_path, rng):
        import pandas as pd

        plan = np.full((3, 2), 1.0 / 6)
        path = tmp_path / "coupling.csv"
        write_coupling_csv(path, Coupling(plan))
        assert np.allclose(pd.read_csv(path).to_numpy(), plan)
