"""
Benchmark case catalogue and the solve driver shared by the CLI and scripts.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, List, Optional, Tuple, Union

import numpy as np

from .colloc2d import CaseDefinition2D, CollocationSystem2D
from .colloc3d import CaseDefinition3D, CollocationSystem3D
from .dofs import CollocationSystem, DiscreteSolution
from .errors import InvalidInputError
from .manufactured import filament_3d, vortex_2d
from .mapped import MappedCollocationSystem, MappedStokesCase, couette_case, wavy_cavity_case
from .solver import NewtonSettings, SolveReport, check_gauge, continuation_solve, default_ladder, newton_solve
from .spaces import build_complex_2d, build_complex_3d
from .splines import stretched_breakpoints, uniform_breakpoints

logger = logging.getLogger(__name__)

CASES = ("vortex2d", "vortex3d", "cavity2d", "cavity3d", "couette", "wavy")
MAPPED_CASES = ("couette", "wavy")

AnyCase = Union[CaseDefinition2D, CaseDefinition3D, MappedStokesCase]


def breakpoints(mesh: int, stretched: bool = False) -> np.ndarray:
    return stretched_breakpoints(mesh) if stretched else uniform_breakpoints(mesh)


def lid_velocity_2d(points) -> np.ndarray:
    """g = (1, 0) on y = 1 strictly between the corners, zero elsewhere."""
    points = np.atleast_2d(points)
    values = np.zeros_like(points, dtype=float)
    lid = (points[:, 1] >= 1.0) & (points[:, 0] > 0.0) & (points[:, 0] < 1.0)
    values[lid, 0] = 1.0
    return values


def lid_velocity_3d(points) -> np.ndarray:
    """g = (1, 0, 0) on the open face y = 1, zero elsewhere."""
    points = np.atleast_2d(points)
    values = np.zeros_like(points, dtype=float)
    inside = (points[:, 0] > 0.0) & (points[:, 0] < 1.0) & (points[:, 2] > 0.0) & (points[:, 2] < 1.0)
    values[(points[:, 1] >= 1.0) & inside, 0] = 1.0
    return values


@dataclass
class BenchmarkCase:
    """
    A case ready to solve.

    Attributes:
        name: Catalogue name
        case: Case definition handed to the assembly
        exact: Exact solution for error norms, or None
        family: Reynolds number -> case, for continuation; None when not applicable
        target_re: Reynolds number of the case
    """

    name: str
    case: AnyCase
    exact: Optional[Any] = None
    family: Optional[Callable[[float], AnyCase]] = None
    target_re: float = 1.0


def vortex2d(formulation: str = "vvp", kprime: int = 2, mesh: int = 8, nu: float = 1.0,
             sigma: float = 1.0, stretched: bool = False, stokes: bool = False,
             penalty: Optional[float] = None, gauge: str = "mean") -> BenchmarkCase:
    """Manufactured 2D vortex with homogeneous Dirichlet data."""
    points = breakpoints(mesh, stretched)
    spaces = build_complex_2d(kprime, points, points)

    def build(reynolds: float) -> CaseDefinition2D:
        exact = vortex_2d(1.0 / reynolds, sigma)
        return CaseDefinition2D(
            formulation=formulation, nu=exact.nu, spaces=spaces,
            forcing=exact.forcing(formulation, stokes), dirichlet=exact.dirichlet,
            penalty_constant=penalty, stokes_only=stokes, gauge=gauge, name="vortex2d",
        )

    return BenchmarkCase("vortex2d", build(1.0 / nu), vortex_2d(nu, sigma), build, 1.0 / nu)


def vortex3d(formulation: str = "vvp", kprime: int = 2, mesh: int = 4, nu: float = 1.0,
             sigma: float = 1.0, stretched: bool = False, stokes: bool = False,
             penalty: Optional[float] = None, gauge: str = "mean") -> BenchmarkCase:
    """Flow around a vortex filament in the unit cube."""
    points = breakpoints(mesh, stretched)
    spaces = build_complex_3d(kprime, points, points, points)

    def build(reynolds: float) -> CaseDefinition3D:
        exact = filament_3d(1.0 / reynolds, sigma)
        return CaseDefinition3D(
            formulation=formulation, nu=exact.nu, spaces=spaces,
            forcing=exact.forcing(formulation, stokes), dirichlet=exact.dirichlet,
            penalty_constant=penalty, stokes_only=stokes, gauge=gauge, name="vortex3d",
        )

    return BenchmarkCase("vortex3d", build(1.0 / nu), filament_3d(nu, sigma), build, 1.0 / nu)


def cavity2d(formulation: str = "vvp", kprime: int = 2, mesh: int = 16, re: float = 100.0,
             stretched: bool = True, stokes: bool = False, penalty: Optional[float] = None,
             gauge: str = "mean") -> BenchmarkCase:
    """Lid-driven cavity on the unit square."""
    points = breakpoints(mesh, stretched)
    case = CaseDefinition2D(
        formulation=formulation, nu=1.0 / re, spaces=build_complex_2d(kprime, points, points),
        dirichlet=lid_velocity_2d, penalty_constant=penalty, stokes_only=stokes, gauge=gauge,
        name="cavity2d",
    )
    return BenchmarkCase("cavity2d", case, None, lambda r: replace(case, nu=1.0 / r), float(re))


def cavity3d(formulation: str = "vvp", kprime: int = 2, mesh: int = 8, re: float = 100.0,
             stretched: bool = False, stokes: bool = False, penalty: Optional[float] = None,
             gauge: str = "mean") -> BenchmarkCase:
    """Lid-driven cube with the lid on y = 1 moving in +x."""
    points = breakpoints(mesh, stretched)
    case = CaseDefinition3D(
        formulation=formulation, nu=1.0 / re, spaces=build_complex_3d(kprime, points, points, points),
        dirichlet=lid_velocity_3d, penalty_constant=penalty, stokes_only=stokes, gauge=gauge,
        name="cavity3d",
    )
    return BenchmarkCase("cavity3d", case, None, lambda r: replace(case, nu=1.0 / r), float(re))


def couette(kprime: int = 2, mesh: int = 4, r_in: float = 1.0, r_out: float = 2.0, U: float = 1.0,
            nu: float = 1.0, penalty: Optional[float] = None, gauge: str = "mean",
            sweep: float = 0.5 * np.pi) -> BenchmarkCase:
    """Couette flow on a quarter annulus."""
    case, exact = couette_case(r_in, r_out, U, kprime=kprime, num_elements=mesh, sweep=sweep, nu=nu,
                               penalty_constant=penalty, gauge=gauge)
    return BenchmarkCase("couette", case, exact)


def wavy(kprime: int = 2, mesh: int = 16, a: float = 1.0, b: float = 0.75, c: float = 1.0,
         stretched: bool = False, nu: float = 1.0, penalty: Optional[float] = None,
         gauge: str = "mean") -> BenchmarkCase:
    case = wavy_cavity_case(a, b, c, kprime=kprime, num_elements=mesh, stretched=stretched, nu=nu,
                            penalty_constant=penalty, gauge=gauge)
    return BenchmarkCase("wavy", case)


def system_for(case: AnyCase, dof_map=None) -> CollocationSystem:
    """Collocation system matching the case type."""
    if isinstance(case, CaseDefinition2D):
        return CollocationSystem2D(case, dof_map)
    if isinstance(case, CaseDefinition3D):
        return CollocationSystem3D(case, dof_map)
    if isinstance(case, MappedStokesCase):
        return MappedCollocationSystem(case, dof_map)
    raise InvalidInputError(f"unsupported case type {type(case).__name__}")


def solve_case(benchmark: BenchmarkCase,
               settings: Optional[NewtonSettings] = None) -> Tuple[DiscreteSolution, List[SolveReport]]:
    """
    Solve a benchmark case, with Reynolds continuation when the ladder has
    more than one stage.

    Args:
        benchmark: Case to solve
        settings: Newton settings; an explicit ladder overrides the default one

    Returns:
        (solution, one SolveReport per stage)
    """
    settings = settings or NewtonSettings()
    base = system_for(benchmark.case)
    nonlinear = not getattr(benchmark.case, "stokes_only", True)
    ladder = settings.continuation_ladder or default_ladder(benchmark.target_re)
    if nonlinear and benchmark.family is not None and len(ladder) > 1:
        if abs(ladder[-1] - benchmark.target_re) > 1e-12 * benchmark.target_re:
            raise InvalidInputError(
                f"continuation ladder must end at Re = {benchmark.target_re:g}, got {ladder[-1]:g}"
            )
        logger.info("Solving %s with continuation over Re = %s", benchmark.name, list(ladder))
        solution, reports = continuation_solve(
            lambda r: system_for(benchmark.family(r), base.dof_map), ladder, settings
        )
    else:
        x0 = base.to_vector(base.initial_solution())
        x, report = newton_solve(base.residual_and_jacobian, x0, settings)
        solution, reports = base.to_solution(x), [report]
    check_gauge(solution, report=reports[-1])
    return solution, reports
