"""
Tests for the sparse direct solve, Newton iteration and Reynolds continuation.
"""

from types import SimpleNamespace

import numpy as np
import pytest
import scipy.sparse as sp

from divcol import presets
from divcol.colloc2d import divergence_max
from divcol.errors import (
    ContinuationError,
    InvalidInputError,
    NewtonDivergedError,
    NewtonMaxItersError,
    SingularSystemError,
)
from divcol.solver import (
    NewtonSettings,
    SolveReport,
    check_gauge,
    continuation_solve,
    default_ladder,
    factorize_and_solve,
    newton_solve,
    solve_linear,
)


def _scalar(a=4.0):
    """Residual x^2 - a with its 1x1 Jacobian."""
    def callback(x, want_jacobian=True):
        r = np.array([x[0] ** 2 - a])
        if not want_jacobian:
            return r
        return r, sp.csr_matrix([[2.0 * x[0]]])
    return callback


def _vortex_family(benchmark):
    base = presets.system_for(benchmark.case)
    return lambda reynolds: presets.system_for(benchmark.family(reynolds), base.dof_map)


class TestLinearSolve:
    def test_identity(self, rng):
        b = rng.standard_normal(12)
        x, stats = factorize_and_solve(sp.identity(12, format="csr"), b)
        np.testing.assert_allclose(x, b)
        assert stats.size == 12
        assert stats.backward_error <= 1e-15

    def test_diagonal(self):
        matrix = sp.diags([2.0, 4.0, 8.0])
        np.testing.assert_allclose(solve_linear(matrix, [2.0, 2.0, 2.0]), [1.0, 0.5, 0.25])

    def test_random_sparse_backward_error(self, rng):
        n = 200
        matrix = sp.random(n, n, density=0.03, random_state=np.random.RandomState(3), format="csr")
        matrix = matrix + sp.diags(rng.uniform(1.0, 2.0, n))
        b = rng.standard_normal(n)
        x, stats = factorize_and_solve(matrix, b)
        residual = np.max(np.abs(matrix @ x - b))
        assert residual <= 1e-10 * (abs(matrix).sum(axis=1).max() * np.max(np.abs(x)) + np.max(np.abs(b)))
        assert stats.backward_error <= 1e-10

    def test_exactly_singular(self):
        with pytest.raises(SingularSystemError):
            solve_linear(sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]]), [1.0, 2.0])

    def test_tiny_pivot(self):
        with pytest.raises(SingularSystemError):
            solve_linear(sp.diags([1.0, 1e-20]), [1.0, 1.0])

    def test_non_finite_entries(self):
        with pytest.raises(SingularSystemError):
            solve_linear(sp.diags([1.0, np.nan]), [1.0, 1.0])

    def test_shape_checks(self):
        with pytest.raises(InvalidInputError):
            solve_linear(sp.csr_matrix(np.ones((2, 3))), [1.0, 1.0])
        with pytest.raises(InvalidInputError):
            solve_linear(sp.identity(3), [1.0, 1.0])

    def test_assembled_couette_system(self):
        system = presets.system_for(presets.couette(kprime=2, mesh=4).case)
        x0 = system.to_vector(system.initial_solution())
        residual, jacobian = system.residual_and_jacobian(x0)
        _, stats = factorize_and_solve(jacobian, -residual)
        assert stats.backward_error <= 1e-10


class TestNewtonSettings:
    def test_defaults(self):
        settings = NewtonSettings()
        assert (settings.abs_tol, settings.rel_tol, settings.max_iters) == (1e-11, 1e-10, 25)
        assert settings.continuation_ladder == ()

    @pytest.mark.parametrize("kwargs", [{"abs_tol": 0.0}, {"rel_tol": -1.0}, {"max_iters": 0}, {"max_iters": 2.5}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            NewtonSettings(**kwargs)

    def test_ladder_converted_to_floats(self):
        assert NewtonSettings(continuation_ladder=[100, 400]).continuation_ladder == (100.0, 400.0)


class TestNewton:
    def test_scalar_root(self):
        x, report = newton_solve(_scalar(), np.array([3.0]))
        assert x[0] == pytest.approx(2.0, abs=1e-10)
        assert report.converged
        assert report.residual_history[0] == pytest.approx(5.0)
        assert report.iterations == len(report.residual_history) - 1
        assert len(report.linear_solver_stats) == report.iterations

    def test_quadratic_convergence(self):
        _, report = newton_solve(_scalar(), np.array([3.0]))
        history = report.residual_history
        assert history[-1] <= 1e-10 * history[0]
        ratios = [b / a ** 2 for a, b in zip(history[1:-1], history[2:]) if a < 1e-1]
        assert ratios and max(ratios) <= 1.0

    def test_already_converged(self):
        x, report = newton_solve(_scalar(), np.array([2.0]))
        assert report.iterations == 0
        assert report.converged
        assert report.final_residual == 0.0

    def test_max_iterations(self):
        with pytest.raises(NewtonMaxItersError) as info:
            newton_solve(_scalar(), np.array([3.0]), NewtonSettings(max_iters=2))
        assert len(info.value.residual_history) == 3

    def test_divergence(self):
        def callback(x, want_jacobian=True):
            r = np.array([x[0] - 1.0])
            return (r, sp.csr_matrix([[1e-6]])) if want_jacobian else r

        with pytest.raises(NewtonDivergedError) as info:
            newton_solve(callback, np.array([0.0]))
        assert info.value.residual_history[0] == pytest.approx(1.0)

    def test_jacobian_shape_checked(self):
        def callback(x, want_jacobian=True):
            return np.ones(2), sp.identity(3, format="csr")

        with pytest.raises(InvalidInputError):
            newton_solve(callback, np.zeros(2))

    def test_report_dict(self):
        _, report = newton_solve(_scalar(), np.array([3.0]))
        summary = report.to_dict()
        assert summary["converged"] is True
        assert summary["iterations"] == report.iterations
        assert summary["backward_error"] <= 1e-10
        assert SolveReport(0, [0.0], True).to_dict()["factorization_fill"] is None

    def test_stokes_vortex_converges_immediately(self):
        benchmark = presets.vortex2d("vp", kprime=2, mesh=4, stokes=True)
        solution, reports = presets.solve_case(benchmark)
        assert reports[0].converged
        assert reports[0].iterations <= 2

    @pytest.mark.parametrize("formulation", ["vp", "vvp"])
    def test_vortex_re1_converges(self, formulation):
        benchmark = presets.vortex2d(formulation, kprime=2, mesh=8)
        solution, reports = presets.solve_case(benchmark)
        report = reports[-1]
        assert report.converged
        assert report.iterations <= 10
        assert report.final_residual <= 1e-10 * max(1.0, report.residual_history[0])
        assert check_gauge(solution)
        scale = max(np.max(np.abs(solution.coeffs["ux"])), np.max(np.abs(solution.coeffs["uy"])))
        assert divergence_max(solution) <= 1e-9 * scale

    def test_solve_case_records_gauge(self):
        _, reports = presets.solve_case(presets.vortex2d("vvp", kprime=2, mesh=4))
        summary = reports[-1].to_dict()
        assert summary["gauge_ok"] is True
        assert abs(summary["gauge_multiplier"]) <= 1e-8

    def test_large_gauge_multiplier_is_reported(self):
        solution = SimpleNamespace(coeffs={"ux": np.ones(3), "p": np.zeros(2)}, lam=1e-3)
        report = SolveReport(1, [1.0, 0.0], True)
        assert check_gauge(solution, report=report) is False
        assert report.to_dict()["gauge_ok"] is False
        assert report.to_dict()["gauge_multiplier"] == pytest.approx(1e-3)
        assert SolveReport(0, [0.0], True).to_dict()["gauge_ok"] is None


class TestContinuation:
    def test_default_ladder(self):
        assert default_ladder(1000.0) == (100.0, 400.0, 1000.0)
        assert default_ladder(400.0) == (400.0,)
        assert default_ladder(100.0) == (100.0,)

    def test_empty_ladder(self):
        with pytest.raises(InvalidInputError):
            continuation_solve(lambda r: None, [])

    def test_ladder_must_increase(self):
        with pytest.raises(InvalidInputError):
            continuation_solve(lambda r: None, [400.0, 100.0])
        with pytest.raises(InvalidInputError):
            continuation_solve(lambda r: None, [100.0, 100.0])

    def test_single_stage_is_a_direct_solve(self):
        benchmark = presets.vortex2d("vvp", kprime=2, mesh=4)
        solution, reports = continuation_solve(_vortex_family(benchmark), [1.0])
        system = presets.system_for(benchmark.case)
        x, report = newton_solve(system.residual_and_jacobian, system.to_vector(system.initial_solution()))
        assert len(reports) == 1
        assert reports[0].iterations == report.iterations
        np.testing.assert_allclose(system.to_vector(solution), x, atol=1e-12)

    def test_two_stages(self):
        benchmark = presets.vortex2d("vvp", kprime=2, mesh=4)
        solution, reports = continuation_solve(_vortex_family(benchmark), [1.0, 10.0])
        assert len(reports) == 2
        assert all(r.converged for r in reports)
        assert solution.lam == pytest.approx(0.0, abs=1e-8)

    def test_failed_stage_reported(self):
        benchmark = presets.vortex2d("vvp", kprime=2, mesh=4)
        with pytest.raises(ContinuationError) as info:
            continuation_solve(_vortex_family(benchmark), [1.0, 10.0], NewtonSettings(max_iters=1))
        assert info.value.stage == 0
        assert info.value.reynolds == 1.0
        assert isinstance(info.value.__cause__, NewtonMaxItersError)

    def test_ladder_must_end_at_target(self):
        benchmark = presets.cavity2d(kprime=2, mesh=4, re=100.0)
        with pytest.raises(InvalidInputError):
            presets.solve_case(benchmark, NewtonSettings(continuation_ladder=(10.0, 50.0)))
