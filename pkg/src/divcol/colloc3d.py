"""
Collocated residual and Jacobian of the 3D VP and VVP forms on the unit cube.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .colloc2d import VectorField, divergence_max, zero_field
from .dofs import (
    FORMULATIONS,
    GAUGES,
    VELOCITY_NAMES,
    CollocationSystem,
    DiscreteSolution,
    DofMap,
    RowAccumulator,
    build_dof_map as _build_dof_map,
    default_penalty,
    outward_normal,
    vorticity_names,
)
from .errors import InvalidInputError, UnsupportedDegreeError
from .spaces import ComplexSpaces3D

logger = logging.getLogger(__name__)

__all__ = [
    "CaseDefinition3D", "DiscreteSolution3D", "CollocationSystem3D", "build_dof_map_3d",
    "assemble_vp_3d", "assemble_vvp_3d", "divergence_max",
]

# Levi-Civita symbol
_EPS = np.zeros((3, 3, 3))
_EPS[0, 1, 2] = _EPS[1, 2, 0] = _EPS[2, 0, 1] = 1.0
_EPS[0, 2, 1] = _EPS[2, 1, 0] = _EPS[1, 0, 2] = -1.0


@dataclass(frozen=True)
class CaseDefinition3D:
    """
    One 3D benchmark problem on the unit cube.

    Attributes:
        formulation: vp or vvp
        nu: Kinematic viscosity
        spaces: Compatible 3D complex
        forcing: (N, 3) -> (N, 3)
        dirichlet: (N, 3) -> (N, 3)
        penalty_constant: C_pen, defaults to 5 (k' + 1)
        stokes_only: Drop the nonlinear terms
        gauge: mean or pin
        name: Label
    """

    formulation: str
    nu: float
    spaces: ComplexSpaces3D
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


class DiscreteSolution3D(DiscreteSolution):
    """Discrete u, p (or P) and, for VVP, the three vorticity components."""


def build_dof_map_3d(case: CaseDefinition3D) -> DofMap:
    """
    DOF map of a 3D case; normal velocity is fixed on every face by a
    tensor-product Greville interpolation of g . n.
    """
    def normal_data(axis, side, points):
        return np.asarray(case.dirichlet(points), dtype=float)[:, axis]

    return _build_dof_map(case.spaces, case.formulation, normal_data, gauge=case.gauge)


class CollocationSystem3D(CollocationSystem):
    solution_class = DiscreteSolution3D

    def __init__(self, case: CaseDefinition3D, dof_map: Optional[DofMap] = None):
        super().__init__(dof_map or build_dof_map_3d(case), case.stokes_only)
        self.case = case
        self._forcing = {
            block.name: np.asarray(case.forcing(block.points), dtype=float)
            for block in self.dof_map.blocks if block.kind == "momentum"
        }

    def _assemble_blocks(self, coeffs, lam, want_jacobian) -> List[RowAccumulator]:
        case = self.case
        momentum = [b for b in self.dof_map.blocks if b.kind == "momentum"]
        if case.formulation == "vp":
            accs = [
                self._momentum_vp(b, coeffs, case.nu, case.penalty, self._forcing[b.name],
                                  case.dirichlet, want_jacobian)
                for b in momentum
            ]
        else:
            accs = [self._momentum_vvp(b, coeffs, want_jacobian) for b in momentum]
        accs.append(self._continuity(self.dof_map.block("continuity"), coeffs, lam, want_jacobian))
        if case.formulation == "vvp":
            accs.extend(
                self._constitutive(b, coeffs, want_jacobian)
                for b in self.dof_map.blocks if b.kind == "constitutive"
            )
        return accs

    def _momentum_vvp(self, block, coeffs, want_jacobian) -> RowAccumulator:
        # nu (curl w)_a + (w x u)_a + dP/dx_a = f_a
        a = block.component
        omega = vorticity_names(3)
        acc = RowAccumulator(self.ops, block, coeffs, want_jacobian)
        for j in range(3):
            for k in range(3):
                if _EPS[a, j, k] == 0.0:
                    continue
                order = [0, 0, 0]
                order[j] = 1
                acc.linear(omega[k], tuple(order), self.case.nu * _EPS[a, j, k])
                if not self.stokes_only:
                    acc.product(omega[j], (0, 0, 0), VELOCITY_NAMES[k], (0, 0, 0), _EPS[a, j, k])
        order = [0, 0, 0]
        order[a] = 1
        acc.linear("p", tuple(order))
        acc.constant(-self._forcing[block.name][:, a])
        return acc

    def _constitutive(self, block, coeffs, want_jacobian) -> RowAccumulator:
        c = block.component
        acc = RowAccumulator(self.ops, block, coeffs, want_jacobian)
        acc.linear(vorticity_names(3)[c], (0, 0, 0))
        # - (curl u)_c
        for j in range(3):
            for k in range(3):
                if _EPS[c, j, k] == 0.0:
                    continue
                order = [0, 0, 0]
                order[j] = 1
                acc.linear(VELOCITY_NAMES[k], tuple(order), -_EPS[c, j, k])

        # (C/h)((u - g) x n)_c summed over incident faces; faces normal to c contribute nothing
        scales = np.zeros((3, block.size))
        for face in sorted(self.dof_map.dirichlet_faces):
            mask = block.on_face(face)
            if not np.any(mask):
                continue
            n = outward_normal(face, 3)
            weight = self.case.penalty / block.spacing(face)
            for j in range(3):
                scales[j, mask] += weight * np.cross(np.eye(3)[j], n)[c]
        boundary = np.any(scales != 0.0, axis=0)
        if np.any(boundary):
            for j in range(3):
                if np.any(scales[j] != 0.0):
                    acc.linear(VELOCITY_NAMES[j], (0, 0, 0), scales[j])
            g = np.zeros((block.size, 3))
            g[boundary] = self.case.dirichlet(block.points[boundary])
            acc.constant(-np.sum(scales * g.T, axis=0))
        return acc

    def penalised_faces(self) -> Dict[str, list]:
        faces = sorted(self.dof_map.dirichlet_faces)
        blocks = self.dof_map.blocks
        if self.case.formulation == "vp":
            return {b.name: [f for f in faces if f[0] != b.component] for b in blocks if b.kind == "momentum"}
        return {b.name: [f for f in faces if f[0] != b.component] for b in blocks if b.kind == "constitutive"}


def _system_for(case, system):
    if system is None:
        return CollocationSystem3D(case)
    if system.case is not case:
        raise InvalidInputError("system was built for a different case")
    return system


def assemble_vp_3d(case: CaseDefinition3D, solution: DiscreteSolution3D, want_jacobian: bool = True,
                   system: Optional[CollocationSystem3D] = None):
    """
    Residual (and Jacobian) of the 3D VP form.

    Rows: [x-mom, y-mom, z-mom, continuity (+ lambda), gauge].
    """
    if case.formulation != "vp":
        raise InvalidInputError("assemble_vp_3d needs a VP case")
    if case.spaces.kprime < 2:
        raise UnsupportedDegreeError("the VP form needs k' >= 2")
    return _system_for(case, system).assemble(solution, want_jacobian)


def assemble_vvp_3d(case: CaseDefinition3D, solution: DiscreteSolution3D, want_jacobian: bool = True,
                    system: Optional[CollocationSystem3D] = None):
    """
    Residual (and Jacobian) of the 3D VVP form.

    Rows: [x-, y-, z-mom, continuity (+ lambda), constitutive-x, -y, -z, gauge].
    """
    if case.formulation != "vvp":
        raise InvalidInputError("assemble_vvp_3d needs a VVP case")
    return _system_for(case, system).assemble(solution, want_jacobian)
