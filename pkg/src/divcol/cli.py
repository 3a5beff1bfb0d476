"""
Batch driver: parse a run configuration, solve cases or studies and write
report.json, profiles.csv and field_samples.csv.

Usage:
    divcol run --config case.cfg [--set key=value]...
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import presets
from .colloc2d import divergence_max
from .errors import AssemblyError, ConfigError, InvalidInputError, SingularSystemError, SolverError
from .mapped import PolarMap, WavyMap, map_from_name
from .solver import NewtonSettings
from .utils import configure_logging, env_int, parse_bool, timed, write_json_report
from .verify import (
    ErrorReport,
    bundled_reference_path,
    centerline_profiles,
    convergence_rates,
    error_norms,
    field_samples,
    load_reference_profiles,
    profile_deviation,
    velocity_extrema,
)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

STUDIES = ("none", "convergence", "robustness")
ROBUSTNESS_PARAMS = ("sigma", "re")
PROFILE_COLUMNS = ["coord", "value", "component"]


@dataclass(frozen=True)
class RunConfig:
    """
    One CLI run. Optional fields left as None are derived in validate().
    """

    case: str = "vortex2d"
    formulation: str = "vvp"
    kprime: int = 2
    mesh: int = 8
    stretched: bool = False
    stokes: Optional[bool] = None
    geometry: Optional[str] = None
    re: Optional[float] = None
    nu: Optional[float] = None
    sigma: float = 1.0
    penalty: Optional[float] = None
    gauge: str = "mean"
    abs_tol: float = 1e-11
    rel_tol: float = 1e-10
    max_iters: int = 25
    ladder: Tuple[float, ...] = ()
    output_dir: str = "results"
    samples: int = 65
    profile_samples: int = 129
    study: str = "none"
    meshes: Tuple[int, ...] = ()
    robustness_param: str = "sigma"
    robustness_values: Tuple[float, ...] = ()
    r_in: float = 1.0
    r_out: float = 2.0
    U: float = 1.0
    sweep: float = 0.5 * np.pi
    wavy_A: float = 1.0
    wavy_B: float = 0.75
    wavy_C: float = 1.0
    workers: Optional[int] = None

    @property
    def is_mapped(self) -> bool:
        return self.case in presets.MAPPED_CASES

    @property
    def settings(self) -> NewtonSettings:
        return NewtonSettings(self.abs_tol, self.rel_tol, self.max_iters, tuple(self.ladder))

    def validate(self) -> "RunConfig":
        """
        Check consistency and fill derived values.

        Returns:
            A fully resolved copy

        Raises:
            ConfigError: Inconsistent or out-of-range values
        """
        if self.case not in presets.CASES:
            raise ConfigError(f"unknown case {self.case!r}; expected one of {', '.join(presets.CASES)}")
        if self.formulation not in ("vp", "vvp"):
            raise ConfigError(f"unknown formulation {self.formulation!r}")
        if self.kprime < 1:
            raise ConfigError(f"kprime must be >= 1, got {self.kprime}")
        if self.formulation == "vp" and self.kprime < 2:
            raise ConfigError("the vp formulation needs kprime >= 2")
        if self.mesh < 2:
            raise ConfigError(f"mesh must be >= 2, got {self.mesh}")
        if self.gauge not in ("mean", "pin"):
            raise ConfigError(f"unknown gauge {self.gauge!r}")
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}")
        if self.samples < 2 or self.profile_samples < 2:
            raise ConfigError("samples and profile_samples must be >= 2")

        updates: Dict[str, Any] = {}
        re, nu = self.re, self.nu
        if re is not None and re <= 0.0 or nu is not None and nu <= 0.0:
            raise ConfigError("re and nu must be positive")
        if re is None and nu is None:
            re, nu = 1.0, 1.0
        elif nu is None:
            nu = 1.0 / re
        elif re is None:
            re = 1.0 / nu
        elif abs(re * nu - 1.0) > 1e-12:
            raise ConfigError(f"re={re:g} and nu={nu:g} disagree")
        updates.update(re=float(re), nu=float(nu))

        stokes = self.stokes
        if self.is_mapped:
            if self.formulation != "vvp":
                raise ConfigError(f"case {self.case} supports only the vvp formulation")
            if stokes is False:
                raise ConfigError(f"case {self.case} is a Stokes problem; stokes=false is not supported")
            stokes = True
        updates["stokes"] = bool(stokes)

        geometry = self.geometry
        if geometry is not None:
            try:
                parsed = map_from_name(geometry)
            except InvalidInputError as e:
                raise ConfigError(str(e)) from e
            if self.case == "couette":
                if not isinstance(parsed, PolarMap):
                    raise ConfigError("case couette needs a polar geometry")
                updates.update(r_in=parsed.r_in, r_out=parsed.r_out)
                if geometry.count(",") == 2:
                    updates["sweep"] = parsed.sweep
            elif self.case == "wavy":
                if not isinstance(parsed, WavyMap):
                    raise ConfigError("case wavy needs a wavy geometry")
                updates.update(wavy_A=parsed.a, wavy_B=parsed.b, wavy_C=parsed.c)
            elif parsed.name != "identity":
                raise ConfigError(f"case {self.case} is posed on the unit square/cube; geometry {geometry!r} is not supported")
        if not 0.0 < self.r_in < self.r_out:
            raise ConfigError(f"need 0 < r_in < r_out, got {self.r_in}, {self.r_out}")

        if self.study == "convergence":
            if len(self.meshes) < 2 or any(b <= a for a, b in zip(self.meshes, self.meshes[1:])):
                raise ConfigError("a convergence study needs at least two increasing meshes")
            if min(self.meshes) < 2:
                raise ConfigError("study meshes must be >= 2")
            if self.case not in ("vortex2d", "vortex3d", "couette"):
                raise ConfigError(f"case {self.case} has no exact solution for a convergence study")
        if self.study == "robustness":
            if self.robustness_param not in ROBUSTNESS_PARAMS:
                raise ConfigError(f"robustness_param must be sigma or re, got {self.robustness_param!r}")
            if not self.robustness_values:
                raise ConfigError("a robustness study needs robustness_values")
            if self.case not in ("vortex2d", "vortex3d"):
                raise ConfigError("robustness studies run on the manufactured vortex cases")
            if self.robustness_param == "re" and min(self.robustness_values) <= 0.0:
                raise ConfigError("Reynolds numbers must be positive")

        updates["workers"] = self.workers if self.workers is not None else env_int("DIVCOL_WORKERS", 1)
        if updates["workers"] < 1:
            raise ConfigError(f"workers must be >= 1, got {updates['workers']}")
        try:
            self.settings
        except InvalidInputError as e:
            raise ConfigError(str(e)) from e
        return replace(self, **updates)


def _to_list(kind):
    def convert(text: str):
        return tuple(kind(item) for item in text.split(",") if item.strip())
    return convert


def _optional(kind):
    def convert(text: str):
        return None if text.strip().lower() in ("", "none", "default") else kind(text)
    return convert


_CONVERTERS = {
    "case": str, "formulation": str, "kprime": int, "mesh": int, "stretched": parse_bool,
    "stokes": _optional(parse_bool), "geometry": _optional(str), "re": _optional(float),
    "nu": _optional(float), "sigma": float, "penalty": _optional(float), "gauge": str,
    "abs_tol": float, "rel_tol": float, "max_iters": int, "ladder": _to_list(float),
    "output_dir": str, "samples": int, "profile_samples": int, "study": str,
    "meshes": _to_list(int), "robustness_param": str, "robustness_values": _to_list(float),
    "r_in": float, "r_out": float, "U": float, "sweep": float,
    "wavy_A": float, "wavy_B": float, "wavy_C": float, "workers": _optional(int),
}


def _split_assignment(text: str, where: str) -> Tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"{where}: expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def _convert(key: str, value: str, where: str):
    if key not in _CONVERTERS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    try:
        return _CONVERTERS[key](value)
    except ValueError as e:
        raise ConfigError(f"{where}: bad value for {key}: {value!r} ({e})") from e


def parse_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Build a RunConfig from a key=value file and --set overrides.

    Args:
        path: Configuration file ('#' comments, blank lines ignored), or None
        overrides: key=value strings applied after the file

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: Unreadable file, unknown key, bad value or inconsistent settings
    """
    values: Dict[str, Any] = {}
    if path is not None:
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        for line_no, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:{line_no}"
            key, value = _split_assignment(line, where)
            values[key] = _convert(key, value, where)
    for item in overrides:
        key, value = _split_assignment(item, "--set")
        values[key] = _convert(key, value, "--set")
    return RunConfig(**values).validate()


def build_benchmark(config: RunConfig) -> presets.BenchmarkCase:
    c = config
    if c.case == "vortex2d":
        return presets.vortex2d(c.formulation, c.kprime, c.mesh, c.nu, c.sigma, c.stretched,
                                c.stokes, c.penalty, c.gauge)
    if c.case == "vortex3d":
        return presets.vortex3d(c.formulation, c.kprime, c.mesh, c.nu, c.sigma, c.stretched,
                                c.stokes, c.penalty, c.gauge)
    if c.case == "cavity2d":
        return presets.cavity2d(c.formulation, c.kprime, c.mesh, c.re, c.stretched, c.stokes,
                                c.penalty, c.gauge)
    if c.case == "cavity3d":
        return presets.cavity3d(c.formulation, c.kprime, c.mesh, c.re, c.stretched, c.stokes,
                                c.penalty, c.gauge)
    if c.case == "couette":
        return presets.couette(c.kprime, c.mesh, c.r_in, c.r_out, c.U, c.nu, c.penalty, c.gauge, c.sweep)
    return presets.wavy(c.kprime, c.mesh, c.wavy_A, c.wavy_B, c.wavy_C, c.stretched, c.nu,
                        c.penalty, c.gauge)


@dataclass
class CaseResult:
    summary: Dict[str, Any]
    profiles: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=PROFILE_COLUMNS))
    samples: pd.DataFrame = field(default_factory=pd.DataFrame)


def run_case(config: RunConfig) -> CaseResult:
    """
    Solve one configured case and post-process it.

    Library exceptions propagate to the caller.
    """
    benchmark = build_benchmark(config)
    case = benchmark.case
    label = f"Case {config.case} (mesh {config.mesh}, k'={config.kprime}) solve"
    with timed(label, logger) as timing:
        solution, reports = presets.solve_case(benchmark, config.settings)

    summary: Dict[str, Any] = {
        "case": config.case,
        "formulation": config.formulation,
        "kprime": config.kprime,
        "mesh": config.mesh,
        "h": float(max(np.max(np.diff(b)) for b in solution.spaces.breakpoints)),
        "re": config.re,
        "nu": config.nu,
        "sigma": config.sigma,
        "stokes": config.stokes,
        "stretched": config.stretched,
        "penalty": case.penalty,
        "gauge": case.gauge,
        "lambda": solution.lam,
        "newton": [r.to_dict() for r in reports],
        "divergence_max": divergence_max(solution),
        "solve_ms": timing.elapsed_ms,
    }
    geometry = getattr(solution, "geometry", None)
    if geometry is not None:
        summary["geometry"] = geometry.describe()

    if benchmark.exact is not None:
        summary["errors"] = error_norms(solution, benchmark.exact, case=config.case).to_dict()

    profiles = pd.DataFrame(columns=PROFILE_COLUMNS)
    if config.case in ("cavity2d", "cavity3d"):
        profiles = centerline_profiles(solution, n_samples=config.profile_samples)
    if config.case == "cavity2d":
        summary["extrema"] = asdict(velocity_extrema(solution))
        try:
            reference = load_reference_profiles(bundled_reference_path(config.re))
            summary["reference_deviation"] = profile_deviation(solution, reference)
        except InvalidInputError:
            logger.debug("No bundled reference profiles at Re = %g", config.re)

    samples = field_samples(solution, config.samples)
    if config.case == "couette":
        omega = samples["omega"].to_numpy()
        summary["omega_exact"] = benchmark.exact.omega
        # constant to round-off on any mesh; the offset from 2A shrinks with refinement
        summary["omega_variation"] = float(np.max(omega) - np.min(omega))
        summary["omega_offset"] = float(np.mean(omega) - benchmark.exact.omega)
        summary["omega_const_error"] = float(np.max(np.abs(omega - benchmark.exact.omega)))
        summary["pressure_l2"] = summary["errors"]["l2"]["pressure"]

    return CaseResult(summary, profiles, samples)


def _study_configs(config: RunConfig) -> List[RunConfig]:
    if config.study == "convergence":
        return [replace(config, mesh=m, study="none") for m in config.meshes]
    if config.robustness_param == "sigma":
        return [replace(config, sigma=v, study="none") for v in config.robustness_values]
    return [replace(config, re=v, nu=1.0 / v, study="none") for v in config.robustness_values]


def _run_all(configs: List[RunConfig], workers: int) -> List[CaseResult]:
    if workers <= 1 or len(configs) <= 1:
        return [run_case(c) for c in configs]
    with ProcessPoolExecutor(max_workers=min(workers, len(configs))) as pool:
        return list(pool.map(run_case, configs))


def _nondecreasing(values: Sequence[float]) -> bool:
    return all(b >= a for a, b in zip(values, values[1:]))


def run(config: RunConfig) -> int:
    """
    Execute a validated configuration and write its artifacts.

    Returns:
        0 on success, 2 on configuration errors, 3 on solver failures
    """
    output = Path(config.output_dir)
    report: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "config": asdict(config),
    }
    try:
        if config.study == "none":
            results = [run_case(config)]
            report["status"] = "ok"
            report["result"] = results[0].summary
        else:
            results = _run_all(_study_configs(config), config.workers)
            report["status"] = "ok"
            report["study"] = config.study
            report["runs"] = [r.summary for r in results]
            errors = [ErrorReport(**r.summary["errors"]) for r in results]
            if config.study == "convergence":
                report["rates"] = {k: asdict(v) for k, v in convergence_rates(errors).items()}
            else:
                velocity = [e.l2["velocity"] for e in errors]
                report["robustness"] = {
                    "param": config.robustness_param,
                    "values": list(config.robustness_values),
                    "velocity_l2": velocity,
                    "velocity_l2_nondecreasing": _nondecreasing(velocity),
                }
    except (ConfigError, InvalidInputError) as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG
    except (SolverError, SingularSystemError, AssemblyError) as e:
        logger.error("Solver failure: %s", e)
        report["status"] = "failed"
        report["error"] = f"{type(e).__name__}: {e}"
        history = getattr(e.__cause__, "residual_history", None) or getattr(e, "residual_history", None)
        if history:
            report["residual_history"] = history
        write_json_report(output / "report.json", report)
        return EXIT_SOLVER

    output.mkdir(parents=True, exist_ok=True)
    final = results[-1]
    final.profiles.to_csv(output / "profiles.csv", index=False)
    final.samples.to_csv(output / "field_samples.csv", index=False)
    write_json_report(output / "report.json", report)
    logger.info("Wrote %s", output / "report.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divcol", description="Divergence-conforming spline collocation benchmarks")
    commands = parser.add_subparsers(dest="command", required=True)
    run_parser = commands.add_parser("run", help="Run a configured case or study")
    run_parser.add_argument("--config", help="key=value configuration file")
    run_parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                            help="Override a configuration value (repeatable)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config, args.overrides)
    except (ConfigError, InvalidInputError) as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
