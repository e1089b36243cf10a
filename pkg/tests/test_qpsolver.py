import numpy as np
import pytest

from footplan import qpsolver as qp

TIGHT = qp.QpSettings(eps_pri=1e-9, eps_dua=1e-9, eps_rel=0.0, max_iters=50000)


def random_problem(rng, n=None, m=None):
    n = n or int(rng.integers(2, 21))
    m = m or int(rng.integers(1, 41))
    root = rng.standard_normal((n, n))
    P = root @ root.T + 0.1 * np.eye(n)
    A = rng.standard_normal((m, n))
    x_feas = rng.standard_normal(n)
    l = A @ x_feas - rng.uniform(0.1, 1.0, m)
    u = A @ x_feas + rng.uniform(0.1, 1.0, m)
    return qp.QpProblem(P, rng.standard_normal(n), A, l, u)


class TestAnalyticCases:
    def test_clamped_scalar(self):
        # min (x-1)^2 s.t. 0 <= x <= 0.5 -> x = 0.5
        prob = qp.QpProblem([[2.0]], [-2.0], [[1.0]], [0.0], [0.5])
        sol = qp.solve(prob, TIGHT)
        assert sol.status == "solved"
        assert sol.x[0] == pytest.approx(0.5, abs=1e-6)

    def test_unconstrained(self):
        prob = qp.QpProblem(2 * np.eye(2), [-2.0, -4.0], np.zeros((0, 2)), [], [])
        sol = qp.solve(prob, TIGHT)
        assert np.allclose(sol.x, [1.0, 2.0], atol=1e-6)

    def test_equality_via_equal_bounds(self):
        prob = qp.QpProblem(2 * np.eye(2), [0.0, 0.0], [[1.0, 1.0]], [1.0], [1.0])
        sol = qp.solve(prob, TIGHT)
        assert np.allclose(sol.x, [0.5, 0.5], atol=1e-6)

    def test_primal_infeasible_detected(self):
        prob = qp.QpProblem(2 * np.eye(1), [0.0], [[1.0], [1.0]],
                            [1.0, -np.inf], [np.inf, 0.0])
        sol = qp.solve(prob)
        assert sol.status == "primal_infeasible"

    def test_non_psd_rejected(self):
        with pytest.raises(qp.QpError):
            qp.solve(qp.QpProblem(-np.eye(2), [0.0, 0.0], np.zeros((0, 2)), [], []))


class TestKktResiduals:
    def test_analytic_optimum_zero_residual(self):
        prob = qp.QpProblem([[2.0]], [-2.0], [[1.0]], [0.0], [0.5])
        # at x=0.5 the active upper bound carries dual y = -(Px+q) / a = 1
        primal, dual = qp.kkt_residuals(prob, np.array([0.5]), np.array([1.0]))
        assert primal < 1e-9 and dual < 1e-9

    def test_zero_point_dual_residual_is_q(self):
        prob = qp.QpProblem([[2.0]], [-2.0], np.zeros((0, 1)), [], [])
        primal, dual = qp.kkt_residuals(prob, np.zeros(1), np.zeros(0))
        assert dual == pytest.approx(2.0)

    def test_perturbation_grows_linearly(self):
        prob = qp.QpProblem([[2.0]], [-2.0], np.zeros((0, 1)), [], [])
        x_star = np.array([1.0])
        deltas = np.array([1e-4, 1e-3, 1e-2])
        residuals = [qp.kkt_residuals(prob, x_star + d, np.zeros(0))[1] for d in deltas]
        slopes = np.asarray(residuals) / deltas
        assert np.allclose(slopes, 2.0, rtol=1e-6)  # slope = ||P||


class TestRandomProblems:
    def test_solved_implies_kkt(self):
        rng = np.random.default_rng(0)
        solved = 0
        for _ in range(200):
            prob = random_problem(rng)
            sol = qp.solve(prob)
            if sol.status == "solved":
                solved += 1
                primal, dual = qp.kkt_residuals(prob, sol.x, sol.y)
                assert primal < 1e-3 and dual < 1e-3
        assert solved >= 195  # overwhelmingly solvable

    def test_scaling_invariance_of_minimizer(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            prob = random_problem(rng, n=8, m=12)
            sol1 = qp.solve(prob, TIGHT)
            scaled = qp.QpProblem(7.3 * prob.P, 7.3 * prob.q, prob.A, prob.l, prob.u)
            sol2 = qp.solve(scaled, TIGHT)
            assert np.abs(sol1.x - sol2.x).max() < 1e-6

    def test_warm_start_never_hurts(self):
        rng = np.random.default_rng(2)
        prob = random_problem(rng, n=10, m=16)
        cold = qp.solve(prob)
        warm = qp.solve(prob, x0=cold.x, y0=cold.y, rho0=cold.rho)
        assert warm.iterations <= cold.iterations

    def test_determinism(self):
        rng = np.random.default_rng(3)
        prob = random_problem(rng)
        a = qp.solve(prob)
        b = qp.solve(prob)
        assert np.array_equal(a.x, b.x) and a.iterations == b.iterations


class TestValidation:
    def test_asymmetric_p_rejected(self):
        with pytest.raises(qp.QpError):
            qp.QpProblem([[1.0, 0.5], [0.0, 1.0]], [0, 0], np.zeros((0, 2)), [], [])

    def test_bounds_order_enforced(self):
        with pytest.raises(qp.QpError):
            qp.QpProblem(np.eye(1), [0.0], [[1.0]], [1.0], [0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(qp.QpError):
            qp.QpProblem(np.eye(2), [0.0, 0.0], [[1.0, 0.0]], [0.0, 0.0], [1.0, 1.0])


class TestJsonInterface:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        prob = random_problem(rng, n=5, m=7)
        path = tmp_path / "problem.json"
        qp.save_problem(prob, path)
        back = qp.load_problem(path)
        assert np.allclose(back.P, prob.P)
        assert np.allclose(back.l, prob.l)

    def test_infinity_sentinel(self, tmp_path):
        prob = qp.QpProblem(np.eye(1), [0.0], [[1.0]], [-np.inf], [np.inf])
        path = tmp_path / "inf.json"
        qp.save_problem(prob, path)
        back = qp.load_problem(path)
        assert np.isneginf(back.l[0]) and np.isposinf(back.u[0])
