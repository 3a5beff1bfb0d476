"""
Tests for the 2D collocated VP and VVP systems on the unit square.
"""

import numpy as np
import pytest

from divcol.colloc2d import (
    CaseDefinition2D,
    CollocationSystem2D,
    DiscreteSolution2D,
    assemble_vp,
    assemble_vvp,
    build_dof_map,
    divergence_max,
)
from divcol.dofs import default_penalty
from divcol.errors import InvalidInputError, UnsupportedDegreeError
from divcol.manufactured import vortex_2d
from divcol.presets import lid_velocity_2d
from divcol.spaces import build_complex_2d, rotor_coeffs_2d
from divcol.splines import stretched_breakpoints, uniform_breakpoints


def _spaces(kprime=2, mesh=4, stretched=False):
    b = stretched_breakpoints(mesh) if stretched else uniform_breakpoints(mesh)
    return build_complex_2d(kprime, b, b)


def _vortex_case(formulation, kprime=2, mesh=4, stokes=False, nu=1.0):
    exact = vortex_2d(nu)
    return CaseDefinition2D(formulation=formulation, nu=nu, spaces=_spaces(kprime, mesh),
                            forcing=exact.forcing(formulation, stokes), dirichlet=exact.dirichlet,
                            stokes_only=stokes, name="vortex2d")


def _zero_solution(spaces, formulation):
    coeffs = {"ux": np.zeros(spaces.vel_x.dim), "uy": np.zeros(spaces.vel_y.dim),
              "p": np.zeros(spaces.pres.dim)}
    if formulation == "vvp":
        coeffs["omega"] = np.zeros(spaces.psi.dim)
    return DiscreteSolution2D(spaces, formulation, coeffs)


class TestCaseDefinition:
    def test_vp_needs_quadratic_pressure(self):
        with pytest.raises(UnsupportedDegreeError):
            CaseDefinition2D(formulation="vp", nu=1.0, spaces=_spaces(kprime=1))

    def test_rejects_bad_values(self):
        spaces = _spaces()
        with pytest.raises(InvalidInputError):
            CaseDefinition2D(formulation="vpp", nu=1.0, spaces=spaces)
        with pytest.raises(InvalidInputError):
            CaseDefinition2D(formulation="vvp", nu=0.0, spaces=spaces)
        with pytest.raises(InvalidInputError):
            CaseDefinition2D(formulation="vvp", nu=1.0, spaces=spaces, penalty_constant=-1.0)
        with pytest.raises(InvalidInputError):
            CaseDefinition2D(formulation="vvp", nu=1.0, spaces=spaces, gauge="corner")

    def test_default_penalty(self):
        case = CaseDefinition2D(formulation="vvp", nu=0.01, spaces=_spaces(kprime=3))
        assert case.penalty == default_penalty(3) == 20.0
        assert case.reynolds == pytest.approx(100.0)

    def test_assembly_checks_formulation(self):
        case = _vortex_case("vvp")
        with pytest.raises(InvalidInputError):
            assemble_vp(case, _zero_solution(case.spaces, "vvp"))


class TestDofMap:
    def test_normal_face_points_removed(self):
        case = _vortex_case("vvp", kprime=2, mesh=4)
        dof_map = build_dof_map(case)
        n_x, n_y = case.spaces.vel_x.shape
        x_mom = dof_map.block("x-mom")
        assert x_mom.size == case.spaces.vel_x.dim - 2 * n_y
        assert not np.any(np.isin(x_mom.points[:, 0], [0.0, 1.0]))
        y_mom = dof_map.block("y-mom")
        assert not np.any(np.isin(y_mom.points[:, 1], [0.0, 1.0]))
        assert dof_map.field("ux").fixed.sum() == 2 * n_y

    def test_homogeneous_data_fixes_zeros(self):
        dof_map = build_dof_map(_vortex_case("vvp"))
        for name in ("ux", "uy"):
            layout = dof_map.field(name)
            assert layout.fixed.any()
            assert np.all(layout.fixed_values == 0.0)

    def test_lid_data_fixes_zero_normal_velocity(self):
        case = CaseDefinition2D(formulation="vvp", nu=0.01, spaces=_spaces(), dirichlet=lid_velocity_2d)
        dof_map = build_dof_map(case)
        np.testing.assert_allclose(dof_map.field("ux").fixed_values, 0.0, atol=1e-14)
        np.testing.assert_allclose(dof_map.field("uy").fixed_values, 0.0, atol=1e-14)

    @pytest.mark.parametrize("kprime", [1, 2, 3])
    @pytest.mark.parametrize("mesh", [2, 4])
    def test_square_system(self, kprime, mesh):
        formulations = ["vvp"] + (["vp"] if kprime >= 2 else [])
        for formulation in formulations:
            dof_map = build_dof_map(_vortex_case(formulation, kprime, mesh))
            assert dof_map.n_unknowns == dof_map.n_equations
            system = CollocationSystem2D(_vortex_case(formulation, kprime, mesh), dof_map)
            _, jacobian = system.assemble(system.initial_solution())
            assert jacobian.shape == (dof_map.n_equations, dof_map.n_unknowns)

    def test_gather_scatter(self, rng):
        dof_map = build_dof_map(_vortex_case("vvp"))
        x = rng.standard_normal(dof_map.n_unknowns)
        coeffs, lam = dof_map.scatter(x)
        np.testing.assert_array_equal(dof_map.gather(coeffs, lam), x)
        with pytest.raises(InvalidInputError):
            dof_map.scatter(x[:-1])

    def test_row_kinds(self):
        case = _vortex_case("vp")
        system = CollocationSystem2D(case)
        labels = system.dof_map.row_kinds(system.penalised_faces())
        assert len(labels) == system.dof_map.n_equations
        assert labels[-1] == "gauge"
        assert "x-mom boundary-penalty" in labels
        assert "x-mom interior" in labels


class TestVPAssembly:
    def test_zero_state_residual_is_minus_forcing(self):
        case = _vortex_case("vp")
        system = CollocationSystem2D(case)
        residual = assemble_vp(case, _zero_solution(case.spaces, "vp"), want_jacobian=False, system=system)
        for block in system.dof_map.blocks:
            rows = residual[block.residual_slice]
            if block.kind == "momentum":
                np.testing.assert_allclose(rows, -case.forcing(block.points)[:, block.component],
                                           atol=1e-12)
            else:
                np.testing.assert_allclose(rows, 0.0, atol=1e-14)

    def test_solenoidal_field_leaves_only_lambda(self, rng):
        spaces = _spaces(kprime=2)
        ux, uy = rotor_coeffs_2d(spaces, rng.standard_normal(spaces.psi.dim))
        field = DiscreteSolution2D(spaces, "vp", {"ux": ux, "uy": uy, "p": np.zeros(spaces.pres.dim)}, lam=0.25)
        # boundary data equal to the field's own trace keeps the normal coefficients unchanged
        case = CaseDefinition2D(formulation="vp", nu=1.0, spaces=spaces, dirichlet=field.velocity)
        system = CollocationSystem2D(case)
        residual = assemble_vp(case, field, want_jacobian=False, system=system)
        rows = residual[system.dof_map.block("continuity").residual_slice]
        np.testing.assert_allclose(rows, 0.25, atol=1e-10 * max(1.0, np.max(np.abs(ux))))

    @pytest.mark.parametrize("stokes", [True, False])
    def test_jacobian_matches_finite_differences(self, rng, jacobian_error, stokes):
        system = CollocationSystem2D(_vortex_case("vp", kprime=2, mesh=4, stokes=stokes))
        x = rng.standard_normal(system.dof_map.n_unknowns)
        for _ in range(3):
            v = rng.standard_normal(len(x))
            assert jacobian_error(system.residual_and_jacobian, x, v) <= 1e-7

    def test_representable_shear_has_zero_residual(self, interpolate):
        spaces = _spaces(kprime=2)
        shear = lambda p: np.stack([p[:, 1], np.zeros(len(p))], axis=1)
        case = CaseDefinition2D(formulation="vp", nu=1.0, spaces=spaces, dirichlet=shear, stokes_only=True)
        coeffs = {"ux": interpolate(spaces.vel_x, lambda p: p[:, 1]), "uy": np.zeros(spaces.vel_y.dim),
                  "p": np.zeros(spaces.pres.dim)}
        residual = assemble_vp(case, DiscreteSolution2D(spaces, "vp", coeffs, stokes_only=True), want_jacobian=False)
        assert np.max(np.abs(residual)) <= 1e-10


class TestVVPAssembly:
    def test_zero_state_lid_penalty(self):
        spaces = _spaces(kprime=2, mesh=4)
        case = CaseDefinition2D(formulation="vvp", nu=0.01, spaces=spaces, dirichlet=lid_velocity_2d)
        system = CollocationSystem2D(case)
        residual = system.assemble(system.initial_solution(), want_jacobian=False)
        block = system.dof_map.block("constitutive")
        rows = residual[block.residual_slice]
        lid = block.on_face((1, 1)) & (block.points[:, 0] > 0.0) & (block.points[:, 0] < 1.0)
        # counter-clockwise tangent on the lid is (-1, 0), so -(C/h)(g . s) = C/h
        np.testing.assert_allclose(rows[lid], case.penalty / block.spacing((1, 1)))
        np.testing.assert_allclose(rows[~lid], 0.0, atol=1e-14)
        momentum = np.concatenate([residual[b.residual_slice] for b in system.dof_map.blocks if b.kind == "momentum"])
        np.testing.assert_allclose(momentum, 0.0, atol=1e-14)

    def test_constant_vorticity(self):
        spaces = _spaces(kprime=2)
        case = CaseDefinition2D(formulation="vvp", nu=1.0, spaces=spaces)
        solution = _zero_solution(spaces, "vvp")
        solution.coeffs["omega"][:] = 2.5
        system = CollocationSystem2D(case)
        residual = assemble_vvp(case, solution, want_jacobian=False, system=system)
        np.testing.assert_allclose(residual[system.dof_map.block("constitutive").residual_slice], 2.5, atol=1e-12)
        for name in ("x-mom", "y-mom"):
            np.testing.assert_allclose(residual[system.dof_map.block(name).residual_slice], 0.0, atol=1e-11)

    def test_zero_state_residual_is_minus_forcing(self):
        case = _vortex_case("vvp")
        system = CollocationSystem2D(case)
        residual = system.assemble(system.initial_solution(), want_jacobian=False)
        for name in ("x-mom", "y-mom"):
            block = system.dof_map.block(name)
            np.testing.assert_allclose(residual[block.residual_slice],
                                       -case.forcing(block.points)[:, block.component], atol=1e-12)

    @pytest.mark.parametrize("kprime", [1, 2])
    def test_jacobian_matches_finite_differences(self, rng, jacobian_error, kprime):
        system = CollocationSystem2D(_vortex_case("vvp", kprime=kprime, mesh=4))
        x = rng.standard_normal(system.dof_map.n_unknowns)
        for _ in range(3):
            v = rng.standard_normal(len(x))
            assert jacobian_error(system.residual_and_jacobian, x, v) <= 1e-7

    @pytest.mark.parametrize("stokes", [True, False])
    def test_representable_shear_has_zero_residual(self, interpolate, stokes):
        # u = (y, 0), w = -1; the rotational form balances w x u with P = y^2 / 2
        spaces = _spaces(kprime=2)
        shear = lambda p: np.stack([p[:, 1], np.zeros(len(p))], axis=1)
        case = CaseDefinition2D(formulation="vvp", nu=0.5, spaces=spaces, dirichlet=shear, stokes_only=stokes)
        total_pressure = (lambda p: np.zeros(len(p))) if stokes else (lambda p: 0.5 * p[:, 1] ** 2)
        coeffs = {
            "ux": interpolate(spaces.vel_x, lambda p: p[:, 1]),
            "uy": np.zeros(spaces.vel_y.dim),
            "p": interpolate(spaces.pres, total_pressure),
            "omega": np.full(spaces.psi.dim, -1.0),
        }
        system = CollocationSystem2D(case)
        residual = system.assemble(DiscreteSolution2D(spaces, "vvp", coeffs, stokes_only=stokes), want_jacobian=False)
        assert np.max(np.abs(residual[:-1])) <= 1e-10

    def test_gauge_rows(self):
        case = _vortex_case("vvp")
        solution = _zero_solution(case.spaces, "vvp")
        solution.coeffs["p"][:] = 1.0
        mean = assemble_vvp(case, solution, want_jacobian=False)
        assert mean[-1] == pytest.approx(1.0)
        pinned = CaseDefinition2D(formulation="vvp", nu=1.0, spaces=case.spaces, gauge="pin")
        solution.coeffs["p"][0] = 3.0
        assert assemble_vvp(pinned, solution, want_jacobian=False)[-1] == pytest.approx(3.0)


class TestDivergenceMax:
    def test_rotor_field_is_solenoidal(self, rng):
        spaces = _spaces(kprime=2, mesh=4, stretched=True)
        ux, uy = rotor_coeffs_2d(spaces, rng.standard_normal(spaces.psi.dim))
        solution = DiscreteSolution2D(spaces, "vp", {"ux": ux, "uy": uy, "p": np.zeros(spaces.pres.dim)})
        assert divergence_max(solution) <= 1e-12 * max(1.0, np.max(np.abs(ux)))

    def test_random_field_is_not(self, rng):
        spaces = _spaces()
        solution = DiscreteSolution2D(spaces, "vp", {
            "ux": rng.standard_normal(spaces.vel_x.dim), "uy": rng.standard_normal(spaces.vel_y.dim),
            "p": np.zeros(spaces.pres.dim)})
        assert divergence_max(solution, n_samples=200) > 1e-3

    def test_sample_count_checked(self):
        spaces = _spaces()
        with pytest.raises(InvalidInputError):
            divergence_max(_zero_solution(spaces, "vp"), n_samples=0)
