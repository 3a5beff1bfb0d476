"""
Tests for run configuration parsing and the batch driver.
"""

import json
from unittest.mock import Mock

import numpy as np
import pandas as pd
import pytest

from divcol.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    SCHEMA_VERSION,
    RunConfig,
    build_benchmark,
    main,
    parse_config,
    run,
)
from divcol.errors import ConfigError
from divcol.mapped import MappedStokesCase
from divcol.utils import timed


def _read_report(directory):
    return json.loads((directory / "report.json").read_text())


class TestParseConfig:
    def test_defaults(self):
        config = parse_config()
        assert config.case == "vortex2d"
        assert (config.re, config.nu) == (1.0, 1.0)
        assert config.stokes is False
        assert config.workers == 1

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "case.cfg"
        path.write_text("# cavity run\ncase = cavity2d   # lid driven\nmesh = 4\n\nre = 400\n")
        config = parse_config(str(path), ["mesh=6", "ladder=100,400"])
        assert config.case == "cavity2d"
        assert config.mesh == 6
        assert config.nu == pytest.approx(1.0 / 400.0)
        assert config.settings.continuation_ladder == (100.0, 400.0)

    @pytest.mark.parametrize("override", ["colour=red", "mesh=abc", "mesh", "stretched=maybe"])
    def test_bad_overrides(self, override):
        with pytest.raises(ConfigError):
            parse_config(overrides=[override])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(str(tmp_path / "absent.cfg"))

    @pytest.mark.parametrize("overrides", [
        ["kprime=0"],
        ["formulation=vp", "kprime=1"],
        ["case=tunnel"],
        ["mesh=1"],
        ["re=100", "nu=0.5"],
        ["re=-1"],
        ["gauge=corner"],
        ["abs_tol=0"],
        ["case=couette", "formulation=vp"],
        ["case=couette", "stokes=false"],
        ["case=couette", "geometry=wavy(1,0.75,1)"],
        ["case=cavity3d", "geometry=polar(1,2)"],
        ["case=vortex2d", "geometry=circle"],
        ["study=convergence", "meshes=8,4"],
        ["study=convergence", "meshes=4"],
        ["case=cavity2d", "study=convergence", "meshes=4,8"],
        ["study=robustness"],
        ["study=robustness", "robustness_param=nu", "robustness_values=1"],
        ["workers=0"],
    ])
    def test_rejected(self, overrides):
        with pytest.raises(ConfigError):
            parse_config(overrides=overrides)

    def test_couette_defaults(self):
        config = parse_config(overrides=["case=couette"])
        assert (config.r_in, config.r_out, config.U) == (1.0, 2.0, 1.0)
        assert config.stokes is True
        assert config.is_mapped
        benchmark = build_benchmark(config)
        assert isinstance(benchmark.case, MappedStokesCase)
        assert benchmark.exact.A == pytest.approx(-1.0 / 3.0)

    def test_geometry_sets_couette_radii(self):
        config = parse_config(overrides=["case=couette", "geometry=polar(1,3,3.14159)"])
        assert (config.r_in, config.r_out) == (1.0, 3.0)
        assert config.sweep == pytest.approx(3.14159)

    def test_geometry_sets_wavy_parameters(self):
        config = parse_config(overrides=["case=wavy", "geometry=wavy(0.25,0.3,5)"])
        assert (config.wavy_A, config.wavy_B, config.wavy_C) == (0.25, 0.3, 5.0)

    def test_nu_derives_re(self):
        config = parse_config(overrides=["nu=0.01"])
        assert config.re == pytest.approx(100.0)

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv("DIVCOL_WORKERS", "3")
        assert parse_config().workers == 3
        monkeypatch.setenv("DIVCOL_WORKERS", "many")
        with pytest.raises(ConfigError):
            parse_config()

    def test_run_config_is_frozen(self):
        with pytest.raises(Exception):
            RunConfig().mesh = 3


class TestMain:
    def test_config_error_exit_code(self, tmp_path):
        code = main(["run", "--set", "case=cavity3d", "--set", "geometry=polar(1,2)",
                     "--set", f"output_dir={tmp_path}"])
        assert code == EXIT_CONFIG
        assert not (tmp_path / "report.json").exists()

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            main([])

    def test_vortex_run(self, tmp_path):
        code = main(["run", "--set", "mesh=2", "--set", "samples=5", "--set", f"output_dir={tmp_path}"])
        assert code == EXIT_OK
        report = _read_report(tmp_path)
        assert report["schema_version"] == SCHEMA_VERSION == "1.0"
        assert report["status"] == "ok"
        result = report["result"]
        assert result["newton"][-1]["converged"] is True
        assert result["newton"][-1]["gauge_ok"] is True
        assert result["solve_ms"] >= 0
        assert set(result["errors"]["l2"]) == {"velocity", "pressure", "vorticity"}
        samples = pd.read_csv(tmp_path / "field_samples.csv")
        assert len(samples) == 25
        assert (tmp_path / "profiles.csv").exists()


class TestRun:
    def test_couette_report(self, tmp_path):
        config = parse_config(overrides=["case=couette", "mesh=2", "samples=5", f"output_dir={tmp_path}"])
        assert run(config) == EXIT_OK
        report = _read_report(tmp_path)
        assert report["schema_version"] == SCHEMA_VERSION
        result = report["result"]
        assert result["omega_exact"] == pytest.approx(-2.0 / 3.0)
        assert result["omega_variation"] <= 1e-7
        assert abs(result["omega_offset"]) == pytest.approx(result["omega_const_error"], abs=1e-7)
        assert result["pressure_l2"] <= 1e-7
        assert result["geometry"].startswith("polar(1,2")
        assert report["config"]["case"] == "couette"

    def test_solver_failure(self, tmp_path):
        config = parse_config(overrides=["mesh=2", "max_iters=1", f"output_dir={tmp_path}"])
        assert run(config) == EXIT_SOLVER
        report = _read_report(tmp_path)
        assert report["status"] == "failed"
        assert report["error"].startswith("NewtonMaxItersError")
        assert len(report["residual_history"]) == 2

    def test_convergence_study(self, tmp_path):
        config = parse_config(overrides=["study=convergence", "meshes=2,4", "samples=3",
                                         f"output_dir={tmp_path}"])
        assert run(config) == EXIT_OK
        report = _read_report(tmp_path)
        assert report["study"] == "convergence"
        assert [r["mesh"] for r in report["runs"]] == [2, 4]
        rates = report["rates"]["velocity_l2"]
        assert len(rates["rates"]) == 1
        assert rates["last"] > 0.0

    def test_robustness_study(self, tmp_path):
        config = parse_config(overrides=["study=robustness", "robustness_values=1,10", "mesh=2",
                                         "samples=3", f"output_dir={tmp_path}"])
        assert run(config) == EXIT_OK
        robustness = _read_report(tmp_path)["robustness"]
        assert robustness["param"] == "sigma"
        assert robustness["values"] == [1.0, 10.0]
        assert len(robustness["velocity_l2"]) == 2
        assert isinstance(robustness["velocity_l2_nondecreasing"], bool)
        assert np.all(np.isfinite(robustness["velocity_l2"]))


class TestTimed:
    def test_records_and_logs_elapsed_time(self):
        log = Mock()
        with timed("solve", log) as timing:
            sum(range(1000))
        assert timing.label == "solve"
        assert timing.elapsed_ms >= 0
        log.info.assert_called_once_with("%s took %d ms", "solve", timing.elapsed_ms)

    def test_logs_when_block_raises(self):
        log = Mock()
        with pytest.raises(ConfigError):
            with timed("parse", log):
                raise ConfigError("bad")
        log.info.assert_called_once()
