"""
Collocated residual and Jacobian of the 2D velocity-pressure (VP) and
vorticity-velocity-pressure (VVP) forms on the unit square.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import qmc

from .dofs import (
    FORMULATIONS,
    GAUGES,
    CollocationSystem,
    DiscreteSolution,
    DofMap,
    RowAccumulator,
    build_dof_map as _build_dof_map,
    default_penalty,
    outward_normal,
)
from .errors import InvalidInputError, UnsupportedDegreeError
from .spaces import ComplexSpaces2D

logger = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray], np.ndarray]


def zero_field(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    return np.zeros_like(points, dtype=float)


@dataclass(frozen=True)
class CaseDefinition2D:
    """
    One 2D benchmark problem on the unit square.

    Attributes:
        formulation: vp or vvp
        nu: Kinematic viscosity (1 / Re)
        forcing: Vectorised body force, (N, 2) points -> (N, 2)
        dirichlet: Vectorised boundary velocity g, (N, 2) -> (N, 2)
        spaces: Compatible spline complex
        penalty_constant: C_pen, defaults to 5 (k' + 1)
        stokes_only: Drop the nonlinear terms
        gauge: mean or pin
        name: Label used in logs and reports
    """

    formulation: str
    nu: float
    spaces: ComplexSpaces2D
    forcing: VectorField = zero_field
    dirichlet: VectorField = zero_field
    penalty_constant: Optional[float] = None
    stokes_only: bool = False
    gauge: str = "mean"
    name: str = "custom"

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise InvalidInputError(f"unknown formulation {self.formulation!r}")
        if not self.nu > 0.0:
            raise InvalidInputError(f"nu must be positive, got {self.nu}")
        if self.penalty_constant is not None and not self.penalty_constant > 0.0:
            raise InvalidInputError(f"penalty constant must be positive, got {self.penalty_constant}")
        if self.gauge not in GAUGES:
            raise InvalidInputError(f"unknown gauge {self.gauge!r}")
        if self.formulation == "vp" and self.spaces.kprime < 2:
            raise UnsupportedDegreeError("the VP form needs k' >= 2 (second velocity derivatives)")

    @property
    def penalty(self) -> float:
        if self.penalty_constant is None:
            return default_penalty(self.spaces.kprime)
        return float(self.penalty_constant)

    @property
    def reynolds(self) -> float:
        return 1.0 / self.nu


class DiscreteSolution2D(DiscreteSolution):
    """Discrete u_x, u_y, p (or P) and, for VVP, omega on a 2D complex."""


def _normal_from_dirichlet(dirichlet: VectorField):
    def normal_data(axis: int, side: int, points: np.ndarray) -> np.ndarray:
        return np.asarray(dirichlet(points), dtype=float)[:, axis]
    return normal_data


def build_dof_map(case: CaseDefinition2D) -> DofMap:
    """
    DOF map of a 2D case with normal velocity imposed on every edge.

    Args:
        case: 2D case definition

    Returns:
        DofMap
    """
    return _build_dof_map(case.spaces, case.formulation, _normal_from_dirichlet(case.dirichlet),
                          gauge=case.gauge)


class CollocationSystem2D(CollocationSystem):
    """Cached DOF map, evaluation matrices and data of a 2D case."""

    solution_class = DiscreteSolution2D

    def __init__(self, case: CaseDefinition2D, dof_map: Optional[DofMap] = None):
        super().__init__(dof_map or build_dof_map(case), case.stokes_only)
        self.case = case
        self._forcing = {
            block.name: np.asarray(case.forcing(block.points), dtype=float)
            for block in self.dof_map.blocks if block.kind == "momentum"
        }

    def _assemble_blocks(self, coeffs, lam, want_jacobian) -> List[RowAccumulator]:
        case = self.case
        blocks = self.dof_map.blocks
        if case.formulation == "vp":
            accs = [
                self._momentum_vp(b, coeffs, case.nu, case.penalty, self._forcing[b.name],
                                  case.dirichlet, want_jacobian)
                for b in blocks if b.kind == "momentum"
            ]
        else:
            accs = [self._momentum_vvp(b, coeffs, want_jacobian) for b in blocks if b.kind == "momentum"]
        accs.append(self._continuity(self.dof_map.block("continuity"), coeffs, lam, want_jacobian))
        if case.formulation == "vvp":
            accs.append(self._constitutive(self.dof_map.block("constitutive"), coeffs, want_jacobian))
        return accs

    def _momentum_vvp(self, block, coeffs, want_jacobian) -> RowAccumulator:
        # x: nu dw/dy - w u_y + dP/dx = f_x ;  y: -nu dw/dx + w u_x + dP/dy = f_y
        nu = self.case.nu
        acc = RowAccumulator(self.ops, block, coeffs, want_jacobian)
        if block.component == 0:
            acc.linear("omega", (0, 1), nu)
            if not self.stokes_only:
                acc.product("omega", (0, 0), "uy", (0, 0), -1.0)
            acc.linear("p", (1, 0))
        else:
            acc.linear("omega", (1, 0), -nu)
            if not self.stokes_only:
                acc.product("omega", (0, 0), "ux", (0, 0), 1.0)
            acc.linear("p", (0, 1))
        acc.constant(-self._forcing[block.name][:, block.component])
        return acc

    def _constitutive(self, block, coeffs, want_jacobian) -> RowAccumulator:
        acc = RowAccumulator(self.ops, block, coeffs, want_jacobian)
        acc.linear("omega", (0, 0))
        acc.linear("uy", (1, 0), -1.0)
        acc.linear("ux", (0, 1), 1.0)

        # (C/h)(u.s - g.s) with s the counter-clockwise tangent, summed over incident edges
        scale_x = np.zeros(block.size)
        scale_y = np.zeros(block.size)
        for face in sorted(self.dof_map.dirichlet_faces):
            mask = block.on_face(face)
            if not np.any(mask):
                continue
            n = outward_normal(face, 2)
            s = np.array([-n[1], n[0]])
            weight = self.case.penalty / block.spacing(face)
            scale_x[mask] += weight * s[0]
            scale_y[mask] += weight * s[1]
        boundary = (scale_x != 0.0) | (scale_y != 0.0)
        if np.any(boundary):
            acc.linear("ux", (0, 0), scale_x)
            acc.linear("uy", (0, 0), scale_y)
            g = np.zeros((block.size, 2))
            g[boundary] = self.case.dirichlet(block.points[boundary])
            acc.constant(-(scale_x * g[:, 0] + scale_y * g[:, 1]))
        return acc

    def penalised_faces(self) -> Dict[str, Tuple]:
        faces = sorted(self.dof_map.dirichlet_faces)
        if self.case.formulation == "vp":
            return {
                b.name: [f for f in faces if f[0] != b.component]
                for b in self.dof_map.blocks if b.kind == "momentum"
            }
        return {"constitutive": faces}


def _system_for(case: CaseDefinition2D, system: Optional[CollocationSystem2D]) -> CollocationSystem2D:
    if system is None:
        return CollocationSystem2D(case)
    if system.case is not case:
        raise InvalidInputError("system was built for a different case")
    return system


def assemble_vp(case: CaseDefinition2D, solution: DiscreteSolution2D, want_jacobian: bool = True,
                system: Optional[CollocationSystem2D] = None):
    """
    Residual (and Jacobian) of the 2D VP form.

    Rows are ordered [x-mom, y-mom, continuity, gauge]. Boundary momentum
    rows add (C^2/h^2)(u_t - g_t) for the tangential component.

    Args:
        case: VP case
        solution: Current iterate
        want_jacobian: Also return the sparse Jacobian
        system: Reusable CollocationSystem2D for the same case

    Returns:
        residual, or (residual, Jacobian)
    """
    if case.formulation != "vp":
        raise InvalidInputError("assemble_vp needs a VP case")
    if case.spaces.kprime < 2:
        raise UnsupportedDegreeError("the VP form needs k' >= 2")
    return _system_for(case, system).assemble(solution, want_jacobian)


def assemble_vvp(case: CaseDefinition2D, solution: DiscreteSolution2D, want_jacobian: bool = True,
                 system: Optional[CollocationSystem2D] = None):
    """
    Residual (and Jacobian) of the 2D VVP form.

    Rows are ordered [x-mom, y-mom, continuity, constitutive, gauge].
    Momentum rows sit at every velocity Greville point that is not fixed by
    the normal condition; constitutive boundary rows add (C/h)(u.s - g.s).
    """
    if case.formulation != "vvp":
        raise InvalidInputError("assemble_vvp needs a VVP case")
    return _system_for(case, system).assemble(solution, want_jacobian)


def divergence_max(solution: DiscreteSolution, n_samples: int = 1000) -> float:
    """
    Largest |div u^h| over quasi-random parametric points.

    Works for 2D and 3D solutions.
    """
    if n_samples < 1:
        raise InvalidInputError(f"n_samples must be >= 1, got {n_samples}")
    points = qmc.Halton(d=solution.ndim, scramble=False).random(n_samples)
    return float(np.max(np.abs(solution.divergence(points))))
