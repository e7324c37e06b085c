import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog, minimize

from rwsparse.model import ProblemInstance, SolverConfig
from rwsparse.probgen import EnsembleSpec, gen_noiseless
from rwsparse.solvers import (
    constrained_weighted_l1,
    min_l2_solution,
    soft_threshold,
    spectral_norm_sq,
    weighted_basis_pursuit,
    weighted_lasso_fista,
)

CFG = SolverConfig()


def lp_basis_pursuit(phi, b, w):
    """Independent LP oracle: min w^T t s.t. -t <= x <= t, phi x = b."""
    m, n = phi.shape
    c = np.concatenate([np.zeros(n), w])
    a_eq = np.hstack([phi, np.zeros((m, n))])
    eye = np.eye(n)
    a_ub = np.vstack([np.hstack([eye, -eye]), np.hstack([-eye, -eye])])
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=np.zeros(2 * n),
        A_eq=a_eq,
        b_eq=b,
        bounds=[(None, None)] * n + [(0, None)] * n,
        method="highs",
    )
    assert res.status == 0
    return res.fun


class TestSoftThreshold:
    def test_examples(self):
        assert soft_threshold(3.0, 1.0) == pytest.approx(2.0)
        assert soft_threshold(-0.5, 1.0) == 0.0
        assert soft_threshold(-4.0, 0.0) == -4.0

    def test_vectorized(self):
        out = soft_threshold(np.array([3.0, -0.5, 0.0]), np.array([1.0, 1.0, 2.0]))
        assert np.allclose(out, [2.0, 0.0, 0.0])

    @given(st.floats(-1e9, 1e9), st.floats(0, 1e9))
    def test_shrinks_toward_zero(self, v, t):
        out = soft_threshold(v, t)
        assert abs(out) == pytest.approx(max(abs(v) - t, 0.0))
        assert out * v >= 0.0


class TestSpectralNormSq:
    def test_identity(self):
        assert spectral_norm_sq(np.eye(2)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert spectral_norm_sq(np.diag([2.0, 1.0])) == pytest.approx(4.0)

    def test_zero_matrix(self):
        assert spectral_norm_sq(np.zeros((2, 3))) == 0.0

    def test_matches_eigensolver(self):
        rng = np.random.default_rng(7)
        phi = rng.standard_normal((5, 8))
        oracle = float(np.linalg.eigvalsh(phi.T @ phi)[-1])
        assert spectral_norm_sq(phi) == pytest.approx(oracle, rel=1e-6)


class TestMinL2Solution:
    def test_symmetric_split(self):
        inst = ProblemInstance(phi=np.array([[1.0, 1.0]]), b=np.array([2.0]))
        assert np.allclose(min_l2_solution(inst), [1.0, 1.0])

    def test_free_coordinate_zero(self):
        inst = ProblemInstance(phi=np.array([[1.0, 0.0]]), b=np.array([5.0]))
        assert np.allclose(min_l2_solution(inst), [5.0, 0.0])

    def test_closed_form(self):
        # phi^T (phi phi^T)^{-1} b = (3, 4) for phi = [[3, 4]], b = [25]
        inst = ProblemInstance(phi=np.array([[3.0, 4.0]]), b=np.array([25.0]))
        assert np.allclose(min_l2_solution(inst), [3.0, 4.0], atol=1e-12)

    def test_residual_and_nullspace_orthogonality(self):
        rng = np.random.default_rng(3)
        phi = rng.standard_normal((6, 15))
        b = rng.standard_normal(6)
        inst = ProblemInstance(phi=phi, b=b)
        z = min_l2_solution(inst)
        assert np.linalg.norm(phi @ z - b) <= 1e-10 * (1 + np.linalg.norm(b))
        # z has no component in null(phi)
        proj = z - phi.T @ np.linalg.solve(phi @ phi.T, phi @ z)
        assert np.linalg.norm(proj) <= 1e-8

    def test_singular_gram_raises(self):
        phi = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        inst = ProblemInstance(phi=phi, b=np.array([1.0, 2.0]))
        with pytest.raises(np.linalg.LinAlgError):
            min_l2_solution(inst)


class TestWeightedBasisPursuit:
    def test_two_vertex_enumeration(self):
        # Feasible segment of x1 + x2 = 1 has vertices (1,0) and (0,1);
        # the cheaper one under w = (1, 2) is (1, 0).
        w = np.array([1.0, 2.0])
        vertices = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
        best = min(vertices, key=lambda v: w @ np.abs(v))
        inst = ProblemInstance(phi=np.array([[1.0, 1.0]]), b=np.array([1.0]))
        rep = weighted_basis_pursuit(inst, w, None, CFG)
        assert rep.converged
        assert np.allclose(rep.x, best, atol=1e-6)

    def test_zero_weights_any_feasible(self):
        inst = ProblemInstance(phi=np.array([[1.0, 1.0]]), b=np.array([1.0]))
        rep = weighted_basis_pursuit(inst, np.zeros(2), None, CFG)
        assert rep.converged
        assert rep.objective == 0.0
        assert abs(rep.x.sum() - 1.0) <= CFG.inner_tol * (1 + 1.0)

    def test_unconstrained_coordinate_zeroed(self):
        phi = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        inst = ProblemInstance(phi=phi, b=np.array([3.0, 4.0]))
        rep = weighted_basis_pursuit(inst, np.ones(3), None, CFG)
        assert np.allclose(rep.x, [3.0, 4.0, 0.0], atol=1e-8)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_lp_oracle(self, seed):
        rng = np.random.default_rng(seed)
        phi = rng.standard_normal((4, 9))
        b = rng.standard_normal(4)
        w = rng.uniform(0.1, 2.0, size=9)
        inst = ProblemInstance(phi=phi, b=b)
        rep = weighted_basis_pursuit(inst, w, None, CFG)
        oracle = lp_basis_pursuit(phi, b, w)
        assert rep.converged
        assert rep.objective <= oracle + 1e-6 * (1 + abs(oracle))
        assert rep.objective >= oracle - 1e-6 * (1 + abs(oracle))

    def test_objective_below_feasible_points(self):
        inst = gen_noiseless(EnsembleSpec(n=40, m=20, s=5, seed=9))
        w = np.random.default_rng(1).uniform(0.0, 2.0, size=40)
        rep = weighted_basis_pursuit(inst, w, None, CFG)
        assert rep.converged
        obj_star = w @ np.abs(inst.x_star)
        assert rep.objective <= obj_star + CFG.inner_tol * (1 + obj_star)
        # random feasible points: ground truth plus null-space directions
        rng = np.random.default_rng(2)
        _, _, vt = np.linalg.svd(inst.phi)
        null = vt[20:].T
        for _ in range(5):
            feas = inst.x_star + null @ rng.standard_normal(20)
            obj = w @ np.abs(feas)
            assert rep.objective <= obj + CFG.inner_tol * (1 + obj)

    def test_residual_contract(self):
        inst = gen_noiseless(EnsembleSpec(n=64, m=24, s=6, seed=4))
        rep = weighted_basis_pursuit(inst, np.ones(64), None, CFG)
        assert rep.converged
        r = np.linalg.norm(inst.phi @ rep.x - inst.b)
        assert r <= CFG.inner_tol * (1 + np.linalg.norm(inst.b))
        assert rep.primal_residual <= CFG.inner_tol

    def test_warm_matches_cold(self):
        inst = gen_noiseless(EnsembleSpec(n=48, m=20, s=5, seed=11))
        w = 1.0 / (np.abs(inst.x_star) + 0.1)
        cold = weighted_basis_pursuit(inst, w, None, CFG)
        warm = weighted_basis_pursuit(inst, w, min_l2_solution(inst), CFG)
        assert abs(cold.objective - warm.objective) <= 10 * CFG.inner_tol * (1 + cold.objective)

    def test_iteration_cap_reports_nonconverged(self):
        inst = gen_noiseless(EnsembleSpec(n=64, m=24, s=20, seed=1))
        cfg = SolverConfig(inner_max_iter=3)
        rep = weighted_basis_pursuit(inst, np.ones(64), None, cfg)
        assert not rep.converged
        assert rep.iterations == 3


class TestWeightedLassoFista:
    def _scalar(self):
        return ProblemInstance(phi=np.array([[1.0]]), b=np.array([3.0]))

    def test_scalar_prox(self):
        rep = weighted_lasso_fista(self._scalar(), np.array([1.0]), 1.0, None, CFG)
        assert rep.x[0] == pytest.approx(2.0, abs=1e-8)

    def test_threshold_exceeds_observation(self):
        rep = weighted_lasso_fista(self._scalar(), np.array([4.0]), 1.0, None, CFG)
        assert rep.x[0] == 0.0

    def test_large_multiplier(self):
        rep = weighted_lasso_fista(self._scalar(), np.array([1.0]), 100.0, None, CFG)
        assert rep.x[0] == pytest.approx(2.99, abs=1e-8)

    def test_lam_zero_returns_zero(self):
        rep = weighted_lasso_fista(self._scalar(), np.array([1.0]), 0.0, None, CFG)
        assert np.all(rep.x == 0.0) and rep.converged and not rep.degenerate

    def test_lam_zero_with_zero_weight_flagged(self):
        rep = weighted_lasso_fista(self._scalar(), np.array([0.0]), 0.0, None, CFG)
        assert rep.degenerate

    def test_negative_lam_rejected(self):
        with pytest.raises(ValueError):
            weighted_lasso_fista(self._scalar(), np.array([1.0]), -1.0, None, CFG)

    @pytest.mark.parametrize("seed", [0, 5, 9])
    def test_optimality_conditions(self, seed):
        rng = np.random.default_rng(seed)
        m, n = 12, 30
        phi = rng.standard_normal((m, n)) / np.sqrt(m)
        b = rng.standard_normal(m)
        w = rng.uniform(0.05, 1.5, size=n)
        lam = float(rng.uniform(1.0, 30.0))
        inst = ProblemInstance(phi=phi, b=b)
        rep = weighted_lasso_fista(inst, w, lam, None, CFG)
        assert rep.converged
        grad = lam * (phi.T @ (phi @ rep.x - b))
        tol = CFG.inner_tol
        for i in range(n):
            if rep.x[i] != 0.0:
                assert abs(grad[i] + w[i] * np.sign(rep.x[i])) <= tol * (1 + w[i])
            else:
                assert abs(grad[i]) <= w[i] + tol

    def test_warm_start_converges_fast(self):
        inst = gen_noiseless(EnsembleSpec(n=40, m=20, s=5, seed=2))
        w = np.ones(40)
        first = weighted_lasso_fista(inst, w, 20.0, None, CFG)
        again = weighted_lasso_fista(inst, w, 20.0, first.x, CFG)
        assert again.iterations <= first.iterations
        assert again.objective == pytest.approx(first.objective, rel=1e-9)


def slsqp_constrained_l1(phi, b, w, eta):
    """Independent oracle via the positive-part split x = p - q."""
    m, n = phi.shape

    def objective(pq):
        return w @ (pq[:n] + pq[n:])

    def constraint(pq):
        r = phi @ (pq[:n] - pq[n:]) - b
        return 0.5 * eta**2 - 0.5 * (r @ r)

    res = minimize(
        objective,
        np.zeros(2 * n),
        method="SLSQP",
        bounds=[(0, None)] * 2 * n,
        constraints=[{"type": "ineq", "fun": constraint}],
        options={"maxiter": 500, "ftol": 1e-12},
    )
    assert res.success
    return res.fun


class TestConstrainedWeightedL1:
    def test_large_budget_returns_zero(self):
        inst = ProblemInstance(phi=np.array([[1.0, 2.0]]), b=np.array([1.0]))
        rep = constrained_weighted_l1(inst, np.array([1.0, 1.0]), 2.0, CFG)
        assert np.all(rep.x == 0.0) and rep.converged

    def test_zero_budget_delegates_to_equality(self):
        inst = ProblemInstance(phi=np.array([[1.0, 1.0]]), b=np.array([1.0]))
        w = np.array([1.0, 2.0])
        rep = constrained_weighted_l1(inst, w, 0.0, CFG)
        eq = weighted_basis_pursuit(inst, w, None, CFG)
        assert np.allclose(rep.x, eq.x, atol=1e-8)

    def test_scalar_analytic(self):
        # min |x| s.t. |x - 3| <= 1 has solution x = 2
        inst = ProblemInstance(phi=np.array([[1.0]]), b=np.array([3.0]))
        rep = constrained_weighted_l1(inst, np.array([1.0]), 1.0, CFG)
        assert rep.x[0] == pytest.approx(2.0, abs=5e-3)
        assert rep.converged

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_matches_slsqp_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = 3
        phi = rng.standard_normal((2, n))
        b = rng.standard_normal(2)
        eta = 0.4 * np.linalg.norm(b)
        inst = ProblemInstance(phi=phi, b=b)
        oracle = slsqp_constrained_l1(phi, b, np.ones(n), float(eta))
        # the default residual band (bisect_tol=1e-3) allows an objective
        # slack of the same order; tighten it for the 1e-4 comparison
        tight = SolverConfig(bisect_tol=1e-7)
        rep = constrained_weighted_l1(inst, np.ones(n), float(eta), tight)
        assert rep.objective == pytest.approx(oracle, abs=1e-4)
        loose = constrained_weighted_l1(inst, np.ones(n), float(eta), CFG)
        assert loose.objective == pytest.approx(oracle, abs=1e-2)

    def test_negative_budget_rejected(self):
        inst = ProblemInstance(phi=np.array([[1.0, 1.0]]), b=np.array([1.0]))
        with pytest.raises(ValueError):
            constrained_weighted_l1(inst, np.ones(2), -0.5, CFG)

    def test_residual_lands_in_band(self):
        inst = gen_noiseless(EnsembleSpec(n=32, m=16, s=4, seed=8))
        eta = 0.3 * np.linalg.norm(inst.b)
        rep = constrained_weighted_l1(inst, np.ones(32), float(eta), CFG)
        res = np.linalg.norm(inst.phi @ rep.x - inst.b)
        assert abs(res - eta) <= CFG.bisect_tol * eta
