"""
Tests for manufactured solutions, error norms, rates, profiles and reference data.
"""

import numpy as np
import pandas as pd
import pytest

from divcol.colloc2d import DiscreteSolution2D
from divcol.colloc3d import DiscreteSolution3D
from divcol.errors import InvalidInputError, ReferenceDataError
from divcol.spaces import build_complex_2d, build_complex_3d, evaluate, rotor_coeffs_2d
from divcol.splines import uniform_breakpoints
from divcol.verify import (
    ErrorReport,
    bundled_reference_path,
    centerline_profiles,
    convergence_rates,
    error_norms,
    field_samples,
    flagged_rows,
    filament_3d,
    load_reference_profiles,
    profile_deviation,
    scalar_error_norms,
    streamfunction,
    velocity_extrema,
    vortex_2d,
    write_reference_profiles,
)


def _spaces(kprime=2, mesh=4):
    b = uniform_breakpoints(mesh)
    return build_complex_2d(kprime, b, b)


def _solution(spaces, ux, uy, formulation="vp", **extra):
    coeffs = {"ux": ux, "uy": uy, "p": extra.pop("p", np.zeros(spaces.pres.dim))}
    if formulation == "vvp":
        coeffs["omega"] = extra.pop("omega", np.zeros(spaces.psi.dim))
    return DiscreteSolution2D(spaces, formulation, coeffs, **extra)


def _report(h, velocity, **kwargs):
    errors = {"velocity": velocity, "pressure": kwargs.get("pressure", velocity),
              "vorticity": kwargs.get("vorticity", velocity)}
    return ErrorReport(h=h, kprime=2, formulation="vvp", l2=dict(errors), h1=dict(errors))


def _random_points(rng, n, ndim, margin=0.02):
    return rng.uniform(margin, 1.0 - margin, (n, ndim))


class _ShearFlow:
    """u = (y, 0), kinematic pressure 0, vorticity -1."""

    def velocity(self, p):
        return np.stack([p[:, 1], np.zeros(len(p))], axis=1)

    def velocity_gradient(self, p):
        grad = np.zeros((len(p), 2, 2))
        grad[:, 0, 1] = 1.0
        return grad

    def pressure(self, p):
        return np.zeros(len(p))

    def pressure_gradient(self, p):
        return np.zeros((len(p), 2))

    def vorticity(self, p):
        return np.full(len(p), -1.0)

    def vorticity_gradient(self, p):
        return np.zeros((len(p), 2))


class TestManufactured:
    def test_vortex_values(self):
        exact = vortex_2d()
        u = exact.velocity(np.array([[0.5, 0.5]]))[0]
        assert u[0] == pytest.approx(0.0, abs=1e-15)
        assert u[1] == pytest.approx(-np.exp(0.5) / 256.0, rel=1e-12)
        assert u[1] == pytest.approx(-6.4403e-3, abs=1e-7)

    def test_filament_values(self):
        exact = filament_3d()
        center = np.array([[0.5, 0.5, 0.5]])
        assert exact.pressure(center)[0] == pytest.approx(0.594715, abs=1e-6)
        assert exact.velocity(center)[0, 0] == pytest.approx(0.0, abs=1e-15)

    def test_pressure_scaling(self, rng):
        points = _random_points(rng, 20, 2)
        np.testing.assert_allclose(vortex_2d(sigma=10.0).pressure(points), 10.0 * vortex_2d().pressure(points))

    @pytest.mark.parametrize("factory,ndim", [(vortex_2d, 2), (filament_3d, 3)])
    def test_solenoidal(self, rng, factory, ndim):
        exact = factory()
        assert np.max(np.abs(exact.divergence(_random_points(rng, 100, ndim)))) <= 1e-12

    @pytest.mark.parametrize("factory,ndim", [(vortex_2d, 2), (filament_3d, 3)])
    def test_vanishes_on_boundary(self, rng, factory, ndim):
        exact = factory()
        for axis in range(ndim):
            for side in (0.0, 1.0):
                points = rng.uniform(0.0, 1.0, (30, ndim))
                points[:, axis] = side
                np.testing.assert_allclose(exact.velocity(points), 0.0, atol=1e-14)

    @pytest.mark.parametrize("factory,ndim", [(vortex_2d, 2), (filament_3d, 3)])
    def test_gradients_match_finite_differences(self, rng, factory, ndim):
        exact = factory()
        points = _random_points(rng, 100, ndim)
        step = 1e-6
        grad_u = exact.velocity_gradient(points)
        grad_p = exact.pressure_gradient(points)
        grad_w = exact.vorticity_gradient(points)
        for j in range(ndim):
            shift = np.zeros(ndim)
            shift[j] = step
            up, down = points + shift, points - shift
            fd_u = (exact.velocity(up) - exact.velocity(down)) / (2 * step)
            fd_p = (exact.pressure(up) - exact.pressure(down)) / (2 * step)
            fd_w = (exact.vorticity(up) - exact.vorticity(down)) / (2 * step)
            np.testing.assert_allclose(fd_u, grad_u[:, :, j], rtol=1e-6, atol=1e-8)
            np.testing.assert_allclose(fd_p, grad_p[:, j], rtol=1e-6, atol=1e-6)
            np.testing.assert_allclose(fd_w, grad_w[..., j], rtol=1e-6, atol=1e-7)

    def test_vorticity_is_curl(self, rng):
        exact = filament_3d()
        points = _random_points(rng, 50, 3)
        g = exact.velocity_gradient(points)
        curl = np.stack([g[:, 2, 1] - g[:, 1, 2], g[:, 0, 2] - g[:, 2, 0], g[:, 1, 0] - g[:, 0, 1]], axis=1)
        np.testing.assert_allclose(exact.vorticity(points), curl, atol=1e-12)

    @pytest.mark.parametrize("factory,ndim", [(vortex_2d, 2), (filament_3d, 3)])
    def test_forcing_conventions_agree(self, rng, factory, ndim):
        exact = factory(nu=0.01)
        points = _random_points(rng, 100, ndim)
        scale = max(1.0, np.max(np.abs(exact.forcing_vp(points))))
        assert exact.forcing_mismatch(points) <= 1e-10 * scale

    def test_unknown_formulation(self):
        with pytest.raises(InvalidInputError):
            vortex_2d().forcing("stream")


class TestErrorNorms:
    def test_scalar_l2(self):
        spaces = _spaces()
        l2, h1 = scalar_error_norms(spaces.pres, np.zeros(spaces.pres.dim), lambda p: p[:, 0],
                                    lambda p: np.column_stack([np.ones(len(p)), np.zeros(len(p))]))
        assert l2 == pytest.approx(1.0 / np.sqrt(3.0), rel=1e-12)
        assert h1 == pytest.approx(1.0, rel=1e-12)

    def test_scalar_without_gradient(self):
        spaces = _spaces()
        _, h1 = scalar_error_norms(spaces.pres, np.zeros(spaces.pres.dim), lambda p: np.ones(len(p)))
        assert h1 is None

    def test_representable_field_has_zero_error(self, interpolate):
        spaces = _spaces(kprime=2)
        solution = _solution(
            spaces,
            interpolate(spaces.vel_x, lambda p: p[:, 1]),
            np.zeros(spaces.vel_y.dim),
            formulation="vvp",
            p=interpolate(spaces.pres, lambda p: 0.5 * p[:, 1] ** 2),
            omega=np.full(spaces.psi.dim, -1.0),
        )
        report = error_norms(solution, _ShearFlow(), case="shear")
        assert report.case == "shear"
        assert report.h == pytest.approx(0.25)
        for norm in (report.l2, report.h1):
            for name, value in norm.items():
                assert value <= 1e-12, name

    def test_pressure_compared_modulo_mean(self, interpolate):
        spaces = _spaces(kprime=2)
        solution = _solution(spaces, interpolate(spaces.vel_x, lambda p: p[:, 1]), np.zeros(spaces.vel_y.dim),
                             p=np.full(spaces.pres.dim, 3.0))
        report = error_norms(solution, _ShearFlow())
        assert report.l2["pressure"] <= 1e-12

    def test_interpolation_error_decreases(self, interpolate):
        exact = vortex_2d()
        errors = []
        for mesh in (4, 8):
            spaces = _spaces(kprime=2, mesh=mesh)
            ux = interpolate(spaces.vel_x, lambda p: exact.velocity(p)[:, 0])
            uy = interpolate(spaces.vel_y, lambda p: exact.velocity(p)[:, 1])
            p = interpolate(spaces.pres, exact.pressure)
            errors.append(error_norms(_solution(spaces, ux, uy, p=p), exact))
        rates = convergence_rates(errors)
        assert rates["velocity_l2"].last > 2.0

    def test_negative_error_rejected(self):
        with pytest.raises(InvalidInputError):
            _report(0.5, -1.0)

    def test_bad_quadrature_order(self):
        spaces = _spaces()
        solution = _solution(spaces, np.zeros(spaces.vel_x.dim), np.zeros(spaces.vel_y.dim))
        with pytest.raises(InvalidInputError):
            error_norms(solution, _ShearFlow(), order=0)


class TestConvergenceRates:
    def test_rate_two(self):
        rates = convergence_rates([_report(0.5, 1e-2), _report(0.25, 2.5e-3)])
        assert rates["velocity_l2"].last == pytest.approx(2.0)
        assert rates["pressure_h1"].rates == [pytest.approx(2.0)]
        assert set(rates) == {f"{f}_{n}" for f in ("velocity", "pressure", "vorticity") for n in ("l2", "h1")}

    def test_three_meshes(self):
        rates = convergence_rates([_report(0.5, 1.6e-1), _report(0.25, 2e-2), _report(0.125, 2.5e-3)])
        np.testing.assert_allclose(rates["velocity_l2"].rates, [3.0, 3.0])

    def test_zero_error_marks_rate_undefined(self):
        rates = convergence_rates([_report(0.5, 1e-2, pressure=0.0), _report(0.25, 2.5e-3, pressure=0.0)])
        assert rates["pressure_l2"].undefined
        assert rates["pressure_l2"].last is None
        assert not rates["velocity_l2"].undefined

    def test_needs_two_reports(self):
        with pytest.raises(InvalidInputError):
            convergence_rates([_report(0.5, 1e-2)])

    def test_mesh_sizes_must_decrease(self):
        with pytest.raises(InvalidInputError):
            convergence_rates([_report(0.25, 1e-2), _report(0.5, 2.5e-3)])


class TestProfiles:
    def test_centerline_lengths(self):
        spaces = _spaces()
        solution = _solution(spaces, np.ones(spaces.vel_x.dim), np.zeros(spaces.vel_y.dim))
        profiles = centerline_profiles(solution, n_samples=33)
        assert len(profiles) == 66
        assert set(profiles["component"]) == {"ux_vertical", "uy_horizontal"}
        np.testing.assert_allclose(profiles.loc[profiles["component"] == "ux_vertical", "value"], 1.0)
        vertical = centerline_profiles(solution, axis=1, n_samples=9)
        assert list(vertical["component"].unique()) == ["ux_vertical"]
        with pytest.raises(InvalidInputError):
            centerline_profiles(solution, axis=2)

    def test_3d_centerlines(self):
        b = uniform_breakpoints(2)
        spaces = build_complex_3d(1, b, b, b)
        coeffs = {"ux": np.zeros(spaces.vel_x.dim), "uy": np.zeros(spaces.vel_y.dim),
                  "uz": np.zeros(spaces.vel_z.dim), "p": np.zeros(spaces.pres.dim)}
        profiles = centerline_profiles(DiscreteSolution3D(spaces, "vp", coeffs), n_samples=5)
        assert len(profiles) == 10
        with pytest.raises(InvalidInputError):
            velocity_extrema(DiscreteSolution3D(spaces, "vp", coeffs))

    def test_extrema_of_quadratic_profiles(self, interpolate):
        spaces = _spaces(kprime=2, mesh=4)
        ux = interpolate(spaces.vel_x, lambda p: (p[:, 1] - 0.3) ** 2 - 0.1)
        uy = interpolate(spaces.vel_y, lambda p: (p[:, 0] - 0.6) ** 2 - 0.2)
        extrema = velocity_extrema(_solution(spaces, ux, uy), n_samples=513)
        assert extrema.ux_min == pytest.approx(-0.1, abs=1e-12)
        assert extrema.y_ux_min == pytest.approx(0.3, abs=1e-6)
        assert extrema.uy_min == pytest.approx(-0.2, abs=1e-12)
        assert extrema.x_uy_min == pytest.approx(0.6, abs=1e-6)
        assert extrema.uy_max == pytest.approx(0.16, abs=1e-12)
        assert extrema.x_uy_max == 0.0
        assert extrema.as_tuple() == (extrema.ux_min, extrema.uy_max, extrema.uy_min)

    def test_field_samples_columns(self):
        spaces = _spaces()
        solution = _solution(spaces, np.zeros(spaces.vel_x.dim), np.zeros(spaces.vel_y.dim), formulation="vvp")
        samples = field_samples(solution, n_samples=5)
        assert list(samples.columns) == ["x", "y", "ux", "uy", "p", "omega", "psi"]
        assert len(samples) == 25


class TestStreamfunction:
    @pytest.mark.parametrize("path", ["y", "x"])
    def test_recovers_generating_potential(self, rng, path):
        spaces = _spaces(kprime=2, mesh=4)
        psi = rng.standard_normal(spaces.psi.dim)
        ux, uy = rotor_coeffs_2d(spaces, psi)
        points = rng.uniform(0.0, 1.0, (50, 2))
        base = points.copy()
        if path == "y":
            base[:, 1] = 0.0
        else:
            base[:] = 0.0
        expected = evaluate(spaces.psi, psi, points) - evaluate(spaces.psi, psi, base)
        result = streamfunction(_solution(spaces, ux, uy), points, path=path)
        np.testing.assert_allclose(result, expected, atol=1e-10 * max(1.0, np.max(np.abs(psi))))

    def test_zero_velocity(self, rng):
        spaces = _spaces()
        solution = _solution(spaces, np.zeros(spaces.vel_x.dim), np.zeros(spaces.vel_y.dim))
        np.testing.assert_array_equal(streamfunction(solution, rng.uniform(0.0, 1.0, (10, 2))), 0.0)

    def test_unknown_path(self):
        spaces = _spaces()
        solution = _solution(spaces, np.zeros(spaces.vel_x.dim), np.zeros(spaces.vel_y.dim))
        with pytest.raises(InvalidInputError):
            streamfunction(solution, [[0.5, 0.5]], path="z")


class TestReferenceData:
    @pytest.mark.parametrize("re", [100, 400, 1000])
    def test_bundled_profiles(self, re):
        table = load_reference_profiles(bundled_reference_path(re))
        counts = table["component"].value_counts()
        assert counts["ux_vertical"] == 17
        assert counts["uy_horizontal"] == 17
        assert (table["re"] == re).all()
        lid = table[(table["component"] == "ux_vertical") & (table["coord"] == 1.0)]
        assert lid["value"].iloc[0] == pytest.approx(1.0)

    def test_unknown_reynolds(self):
        with pytest.raises(ReferenceDataError):
            bundled_reference_path(123.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ReferenceDataError):
            load_reference_profiles(tmp_path / "absent.csv")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# provenance only\n")
        with pytest.raises(ReferenceDataError):
            load_reference_profiles(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("y,u\n0.5,0.1\n")
        with pytest.raises(ReferenceDataError):
            load_reference_profiles(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "row.csv"
        path.write_text("coord,value,re,component,source\n0.5,abc,100,ux_vertical,test\n")
        with pytest.raises(ReferenceDataError):
            load_reference_profiles(path)

    def test_write_then_load(self, tmp_path):
        table = pd.DataFrame({
            "coord": [0.0, 0.5, 1.0], "value": [0.0, -0.2, 1.0], "re": [100.0] * 3,
            "component": ["ux_vertical"] * 3, "source": ["unit"] * 3,
        })
        path = write_reference_profiles(table, tmp_path / "ref.csv", provenance=["made in a test"])
        assert path.read_text().startswith("# made in a test\n")
        pd.testing.assert_frame_equal(load_reference_profiles(path), table)

    def test_write_needs_columns(self, tmp_path):
        with pytest.raises(ReferenceDataError):
            write_reference_profiles(pd.DataFrame({"coord": [0.0]}), tmp_path / "x.csv")

    def test_profile_deviation(self):
        spaces = _spaces()
        solution = _solution(spaces, np.zeros(spaces.vel_x.dim), np.zeros(spaces.vel_y.dim))
        reference = pd.DataFrame({
            "coord": [0.25, 0.75], "value": [0.3, -0.4], "re": [100.0, 100.0],
            "component": ["ux_vertical", "ux_vertical"], "source": ["unit", "unit"],
        })
        deviation = profile_deviation(solution, reference)
        assert deviation["ux_vertical_rms"] == pytest.approx(np.sqrt(0.125))
        assert deviation["ux_vertical_max"] == pytest.approx(0.4)
        assert "uy_horizontal_rms" not in deviation

    def test_non_increasing_coordinates(self, tmp_path):
        path = tmp_path / "order.csv"
        path.write_text(
            "# provenance\ncoord,value,re,component,source\n"
            "0.5,0.1,100,ux_vertical,test\n0.25,0.2,100,ux_vertical,test\n"
        )
        with pytest.raises(ReferenceDataError, match="not increasing"):
            load_reference_profiles(path)

    def test_only_re400_carries_a_flagged_row(self):
        for re, expected in [(100, 0), (400, 1), (1000, 0)]:
            table = load_reference_profiles(bundled_reference_path(re))
            assert int(flagged_rows(table).sum()) == expected
        table = load_reference_profiles(bundled_reference_path(400))
        flagged = table[flagged_rows(table)].iloc[0]
        assert flagged["coord"] == pytest.approx(0.9063)
        assert flagged["component"] == "uy_horizontal"

    def test_profile_deviation_skips_flagged_rows(self):
        spaces = _spaces()
        solution = _solution(spaces, np.zeros(spaces.vel_x.dim), np.zeros(spaces.vel_y.dim))
        reference = pd.DataFrame({
            "coord": [0.25, 0.75], "value": [0.3, -5.0], "re": [100.0, 100.0],
            "component": ["ux_vertical", "ux_vertical"], "source": ["unit", "unit-misprint"],
        })
        assert profile_deviation(solution, reference)["ux_vertical_max"] == pytest.approx(0.3)
        full = profile_deviation(solution, reference, include_flagged=True)
        assert full["ux_vertical_max"] == pytest.approx(5.0)
