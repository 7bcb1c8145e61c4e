import numpy as np
import pytest

from sketchipm.shared.errors import InnerSolverBreakdown, InnerSolverDiverged, InvalidParameter
from sketchipm.shared.linalg.kernels import thin_svd
from sketchipm.shared.models.core import InnerSolverKind, SketchKind
from sketchipm.solver.inner.engine import (
    pcg_solve,
    psi_bound,
    richardson_solve,
    sd_solve,
    theoretical_inner_iters,
)
from sketchipm.solver.preconditioning.engine import (
    apply_precond_normal_op,
    apply_Q_inv_half,
    build_preconditioner,
)
from sketchipm.solver.sketching.engine import SketchSpec, build_sketch, embedding_quality

from conftest import random_sparse

SPD = np.array([[4.0, 1.0], [1.0, 3.0]])


def identity_map(z):
    return z


class TestPcgSolve:
    def test_two_by_two(self):
        z, report = pcg_solve(SPD, np.array([1.0, 2.0]), t_max=10, tol=1e-12)
        np.testing.assert_allclose(z, [1.0 / 11.0, 7.0 / 11.0], atol=1e-12)
        assert report.converged
        assert report.iterations <= 2

    def test_zero_rhs(self):
        z, report = pcg_solve(SPD, np.zeros(2), t_max=10, tol=1e-8)
        assert report.iterations == 0
        assert report.converged
        assert not np.any(z)

    def test_identity_converges_in_one_step(self, rng):
        rhs = rng.standard_normal(5)
        z, report = pcg_solve(np.eye(5), rhs, t_max=10, tol=1e-12)
        assert report.iterations == 1
        np.testing.assert_allclose(z, rhs, atol=1e-14)

    def test_history_and_step_sizes(self, rng):
        g = rng.standard_normal((8, 8))
        op = g @ g.T + np.eye(8)
        rhs = rng.standard_normal(8)
        z, report = pcg_solve(op, rhs, t_max=3, tol=1e-14)
        assert report.iterations == 3
        assert len(report.residual_history) == 4
        assert report.residual_history[0] == pytest.approx(np.linalg.norm(rhs))
        assert len(report.step_sizes) == 3
        assert all(alpha > 0.0 for alpha in report.step_sizes)
        np.testing.assert_allclose(report.final_residual, op @ z - rhs, atol=1e-12)

    def test_callback_sees_every_iterate(self):
        seen = []
        pcg_solve(SPD, np.array([1.0, 2.0]), t_max=10, tol=1e-12, callback=lambda z: seen.append(z.copy()))
        assert len(seen) >= 1

    def test_indefinite_operator_breaks_down(self):
        with pytest.raises(InnerSolverBreakdown):
            pcg_solve(-np.eye(3), np.ones(3), t_max=5, tol=1e-8)

    def test_kind_is_recorded(self):
        _, report = pcg_solve(identity_map, np.ones(2), t_max=2, tol=1e-8, kind=InnerSolverKind.CG)
        assert report.solver is InnerSolverKind.CG


class TestRichardsonSolve:
    def test_contraction(self, rng):
        rhs = rng.standard_normal(4)
        z, report = richardson_solve(0.9 * np.eye(4), identity_map, rhs, t_max=50, tol=1e-10)
        assert report.converged
        np.testing.assert_allclose(z, rhs / 0.9, rtol=1e-9)
        history = report.residual_history
        for previous, current in zip(history, history[1:]):
            assert current <= 0.1 * previous + 1e-14

    def test_preconditioner_applied_to_rhs(self):
        p = np.array([2.0, 4.0])
        z, report = richardson_solve(np.eye(2), lambda r: 0.5 * r, p, t_max=5, tol=1e-12)
        assert report.iterations == 1
        np.testing.assert_allclose(z, [1.0, 2.0])

    def test_divergence_detected(self):
        with pytest.raises(InnerSolverDiverged):
            richardson_solve(3.0 * np.eye(2), identity_map, np.ones(2), t_max=20, tol=1e-12)


class TestSdSolve:
    def test_two_by_two(self):
        z, report = sd_solve(SPD, np.array([1.0, 2.0]), t_max=200, tol=1e-10)
        assert report.converged
        np.testing.assert_allclose(z, [1.0 / 11.0, 7.0 / 11.0], atol=1e-9)
        assert all(alpha > 0.0 for alpha in report.step_sizes)
        assert len(report.step_sizes) == report.iterations

    def test_identity_one_step(self, rng):
        rhs = rng.standard_normal(3)
        _, report = sd_solve(np.eye(3), rhs, t_max=10, tol=1e-12)
        assert report.iterations == 1
        assert report.step_sizes[0] == pytest.approx(1.0)

    def test_indefinite_operator_breaks_down(self):
        with pytest.raises(InnerSolverBreakdown):
            sd_solve(-np.eye(2), np.ones(2), t_max=5, tol=1e-8)

    def test_successive_residuals_orthogonal(self, rng):
        basis, _ = np.linalg.qr(rng.standard_normal((12, 12)))
        op = basis @ np.diag(np.linspace(1.0, 4.0, 12)) @ basis.T
        rhs = rng.standard_normal(12)
        residuals = [-rhs]
        sd_solve(op, rhs, t_max=15, tol=1e-12, callback=lambda z: residuals.append(op @ z - rhs))
        assert len(residuals) == 16
        for previous, current in zip(residuals, residuals[1:]):
            overlap = abs(float(current @ previous))
            assert overlap <= 1e-9 * np.linalg.norm(current) * np.linalg.norm(previous)

    def test_step_sizes_near_one_for_tight_operator(self, rng):
        zeta = 0.5
        tight = zeta * (1.0 - zeta) / 2.0
        # ||I - op|| below tight / (1 + tight) keeps every exact line search step within tight of 1
        spread = 0.99 * tight / (1.0 + tight)
        basis, _ = np.linalg.qr(rng.standard_normal((10, 10)))
        op = basis @ np.diag(np.linspace(1.0 - spread, 1.0 + spread, 10)) @ basis.T
        assert np.linalg.norm(np.eye(10) - op, 2) <= spread + 1e-12

        _, report = sd_solve(op, rng.standard_normal(10), t_max=30, tol=1e-12)
        assert report.converged
        assert report.step_sizes
        for alpha in report.step_sizes:
            assert abs(alpha - 1.0) <= tight
        history = report.residual_history
        for previous, current in zip(history, history[1:]):
            assert current <= zeta * previous + 1e-14


class TestPreconditionedDecay:
    """Per-step contraction of the true residual once the sketch embeds the row space of AD"""

    @pytest.mark.parametrize("solver", ["pcg", "richardson", "sd"])
    def test_residual_halves_each_step(self, solver):
        m, n = 5, 600
        a = random_sparse(m, n, 0.1, seed=21)
        checked = 0
        for seed in range(6):
            rng = np.random.default_rng(seed)
            d = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), n))
            sketch = build_sketch(n, SketchSpec(kind=SketchKind.GAUSSIAN, w=1000, seed=seed))
            row_space = thin_svd(a.toarray() * d).vt
            if embedding_quality(row_space, sketch) > 0.25:
                continue
            checked += 1

            precond = build_preconditioner(a, d, sketch)

            def op(z):
                return apply_precond_normal_op(precond, a, d, z)

            def q_inv_half(r):
                return apply_Q_inv_half(precond, r)

            p = rng.standard_normal(m)
            p /= np.linalg.norm(p)
            if solver == "pcg":
                _, report = pcg_solve(op, q_inv_half(p), t_max=30, tol=1e-10)
            elif solver == "richardson":
                _, report = richardson_solve(op, q_inv_half, p, t_max=30, tol=1e-10)
            else:
                _, report = sd_solve(op, q_inv_half(p), t_max=30, tol=1e-10)

            assert report.converged
            history = report.residual_history
            for previous, current in zip(history, history[1:]):
                assert current <= 0.5 * previous + 1e-12
        assert checked >= 3


class TestTheoreticalInnerIters:
    def test_known_value(self):
        assert theoretical_inner_iters(7, gamma=0.9, sigma=0.5, zeta=0.5) == 14

    def test_grows_with_n(self):
        assert theoretical_inner_iters(10_000, 0.9, 0.5, 0.5) > theoretical_inner_iters(10, 0.9, 0.5, 0.5)

    def test_smaller_zeta_needs_fewer(self):
        assert theoretical_inner_iters(100, 0.9, 0.5, 0.1) < theoretical_inner_iters(100, 0.9, 0.5, 0.5)

    def test_psi_bound(self):
        assert psi_bound(1, 0.0, 0.0) == pytest.approx(10.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 0, "gamma": 0.9, "sigma": 0.5, "zeta": 0.5},
            {"n": 5, "gamma": 1.0, "sigma": 0.5, "zeta": 0.5},
            {"n": 5, "gamma": 0.9, "sigma": 0.8, "zeta": 0.5},
            {"n": 5, "gamma": 0.9, "sigma": 0.5, "zeta": 0.9995},
        ],
    )
    def test_rejects_out_of_range(self, kwargs):
        with pytest.raises(InvalidParameter):
            theoretical_inner_iters(**kwargs)
