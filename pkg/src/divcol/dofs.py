"""
Degree-of-freedom bookkeeping and row assembly shared by the 2D, 3D and
mapped collocation systems.

A DofMap lists the unknown fields (velocity components, pressure and, for
the rotational form, vorticity), which of their coefficients are fixed by
the strongly imposed normal velocity, and the equation blocks with the
Greville points each block is collocated at. The unknown vector is

    [free velocity coefficients..., pressure, vorticity..., lambda]

and the residual is

    [momentum blocks..., continuity (+ lambda), constitutive blocks..., gauge].
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, InvalidInputError
from .spaces import (
    ComplexSpaces2D,
    ComplexSpaces3D,
    Face,
    GrevilleGrid,
    TensorSpace,
    evaluate,
    evaluation_matrix,
    greville_grid,
)
from .splines import basis_integrals

logger = logging.getLogger(__name__)

Formulation = Literal["vp", "vvp"]
GaugeKind = Literal["mean", "pin"]
Spaces = Union[ComplexSpaces2D, ComplexSpaces3D]
NormalData = Callable[[int, int, np.ndarray], np.ndarray]

VELOCITY_NAMES = ("ux", "uy", "uz")
AXIS_NAMES = ("x", "y", "z")
FORMULATIONS = ("vp", "vvp")
GAUGES = ("mean", "pin")


def default_penalty(kprime: int) -> float:
    """Default boundary penalty constant 5 (k' + 1)."""
    return 5.0 * (kprime + 1)


def all_faces(ndim: int) -> FrozenSet[Face]:
    return frozenset((axis, side) for axis in range(ndim) for side in (0, 1))


def outward_normal(face: Face, ndim: int) -> np.ndarray:
    normal = np.zeros(ndim)
    axis, side = face
    normal[axis] = 1.0 if side == 1 else -1.0
    return normal


def vorticity_names(ndim: int) -> Tuple[str, ...]:
    return ("omega",) if ndim == 2 else ("omega_x", "omega_y", "omega_z")


@dataclass(frozen=True)
class FieldLayout:
    """
    Coefficients of one unknown field.

    Attributes:
        name: Field name (ux, uy, uz, p, omega, omega_x, ...)
        space: Spline space of the field
        fixed: Mask of coefficients fixed by the normal boundary condition
        fixed_values: Values of the fixed coefficients (zero elsewhere)
        free: Indices of free coefficients
        offset: Position of the first free coefficient in the unknown vector
    """

    name: str
    space: TensorSpace
    fixed: np.ndarray
    fixed_values: np.ndarray
    free: np.ndarray
    offset: int

    @property
    def n_free(self) -> int:
        return len(self.free)

    @property
    def unknowns(self) -> slice:
        return slice(self.offset, self.offset + self.n_free)


@dataclass(frozen=True)
class EquationBlock:
    """
    One family of collocation equations.

    Attributes:
        name: Block name, e.g. x-mom, continuity, constitutive-y
        kind: momentum, continuity or constitutive
        component: Vector component for momentum / 3D constitutive blocks, else -1
        grid: Greville grid the equations are collocated on
        rows: Grid points kept after removing normal-velocity face points
        offset: Position of the first row in the residual
    """

    name: str
    kind: str
    component: int
    grid: GrevilleGrid
    rows: np.ndarray
    offset: int

    @property
    def size(self) -> int:
        return len(self.rows)

    @property
    def points(self) -> np.ndarray:
        return self.grid.points[self.rows]

    @property
    def residual_slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)

    def on_face(self, face: Face) -> np.ndarray:
        """Mask over kept rows lying on the given face."""
        return self.grid.face_mask(*face)[self.rows]

    def spacing(self, face: Face) -> float:
        """Greville mesh size perpendicular to the face on this block's grid."""
        return self.grid.spacing(*face)


@dataclass(frozen=True)
class DofMap:
    """
    Unknown and equation layout of one collocated system.

    Attributes:
        spaces: The spline complex
        formulation: vp or vvp
        fields: Unknown fields in vector order
        blocks: Equation blocks in residual order
        dirichlet_faces: Faces where the normal velocity is imposed strongly
        gauge: mean (zero-integral pressure) or pin (first coefficient zero)
        gauge_weights: Basis integrals of the pressure space
    """

    spaces: Spaces
    formulation: str
    fields: Tuple[FieldLayout, ...]
    blocks: Tuple[EquationBlock, ...]
    dirichlet_faces: FrozenSet[Face]
    gauge: str
    gauge_weights: np.ndarray

    @property
    def ndim(self) -> int:
        return self.spaces.ndim

    @property
    def n_free(self) -> int:
        return sum(f.n_free for f in self.fields)

    @property
    def n_unknowns(self) -> int:
        return self.n_free + 1

    @property
    def n_equations(self) -> int:
        return sum(b.size for b in self.blocks) + 1

    @property
    def lambda_index(self) -> int:
        return self.n_free

    @property
    def gauge_row(self) -> int:
        return self.n_equations - 1

    def field(self, name: str) -> FieldLayout:
        for layout in self.fields:
            if layout.name == name:
                return layout
        raise KeyError(name)

    def block(self, name: str) -> EquationBlock:
        for block in self.blocks:
            if block.name == name:
                return block
        raise KeyError(name)

    def scatter(self, x: np.ndarray) -> Tuple[Dict[str, np.ndarray], float]:
        """Split an unknown vector into full coefficient vectors and lambda."""
        x = np.asarray(x, dtype=float)
        if len(x) != self.n_unknowns:
            raise InvalidInputError(f"expected {self.n_unknowns} unknowns, got {len(x)}")
        coeffs = {}
        for layout in self.fields:
            full = layout.fixed_values.copy()
            full[layout.free] = x[layout.unknowns]
            coeffs[layout.name] = full
        return coeffs, float(x[self.lambda_index])

    def gather(self, coeffs: Dict[str, np.ndarray], lam: float = 0.0) -> np.ndarray:
        """Inverse of scatter; fixed coefficients are taken from the map."""
        x = np.empty(self.n_unknowns)
        for layout in self.fields:
            values = np.asarray(coeffs[layout.name], dtype=float)
            if len(values) != layout.space.dim:
                raise InvalidInputError(
                    f"field {layout.name}: expected {layout.space.dim} coefficients, got {len(values)}"
                )
            x[layout.unknowns] = values[layout.free]
        x[self.lambda_index] = lam
        return x

    def row_kinds(self, penalised: Dict[str, Sequence[Face]]) -> List[str]:
        """
        Human-readable type of every residual row.

        Args:
            penalised: Block name -> faces whose rows carry a boundary term

        Returns:
            One label per residual row, gauge row last
        """
        labels = []
        for block in self.blocks:
            mask = np.zeros(block.size, dtype=bool)
            for face in penalised.get(block.name, ()):
                mask |= block.on_face(face)
            if block.kind == "continuity":
                labels.extend([block.name] * block.size)
            else:
                labels.extend(
                    f"{block.name} boundary-penalty" if m else f"{block.name} interior" for m in mask
                )
        labels.append("gauge")
        return labels


def _trace_interpolation(space: TensorSpace, axis: int, side: int,
                         normal_data: NormalData) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coefficients of `space` on a face interpolating the normal data at the
    face Greville points.

    Returns:
        (flat coefficient indices, values)
    """
    trace = space.without(axis)
    grid = greville_grid(trace)
    kv = space.knot_vectors[axis]
    coordinate = kv.domain[side]
    points = np.insert(grid.points, axis, coordinate, axis=1)
    values = np.asarray(normal_data(axis, side, points), dtype=float).ravel()
    if len(values) != trace.dim:
        raise AssemblyError(
            f"normal data returned {len(values)} values for {trace.dim} face points"
        )
    matrix = evaluation_matrix(trace, grid.points, (0,) * trace.ndim).tocsc()
    try:
        coeffs = spla.splu(matrix).solve(values)
    except RuntimeError as e:
        raise AssemblyError(f"singular trace interpolation on face {(axis, side)}: {e}") from e
    if not np.all(np.isfinite(coeffs)):
        raise AssemblyError(f"non-finite trace interpolant on face {(axis, side)}")
    multi = np.insert(grid.indices, axis, 0 if side == 0 else kv.n - 1, axis=1)
    return space.flat_index(multi), coeffs


def build_dof_map(spaces: Spaces, formulation: str, normal_data: NormalData,
                  dirichlet_faces: Optional[FrozenSet[Face]] = None,
                  gauge: str = "mean") -> DofMap:
    """
    Classify coefficients and collocation points of a compatible discretization.

    Args:
        spaces: 2D or 3D spline complex
        formulation: vp or vvp
        normal_data: Callback (axis, side, points) -> prescribed value of the
            axis-th velocity component at points on that face
        dirichlet_faces: Faces with strongly imposed normal velocity (all by default)
        gauge: mean or pin

    Returns:
        DofMap whose system is square
    """
    if formulation not in FORMULATIONS:
        raise InvalidInputError(f"unknown formulation {formulation!r}")
    if gauge not in GAUGES:
        raise InvalidInputError(f"unknown gauge {gauge!r}")
    ndim = spaces.ndim
    faces = all_faces(ndim) if dirichlet_faces is None else frozenset(dirichlet_faces)

    unknown_spaces: List[Tuple[str, TensorSpace]] = [
        (VELOCITY_NAMES[a], spaces.velocity[a]) for a in range(ndim)
    ]
    unknown_spaces.append(("p", spaces.pres))
    if formulation == "vvp":
        unknown_spaces.extend(zip(vorticity_names(ndim), spaces.vorticity))

    fields = []
    offset = 0
    for index, (name, space) in enumerate(unknown_spaces):
        fixed = np.zeros(space.dim, dtype=bool)
        values = np.zeros(space.dim)
        if index < ndim:
            for side in (0, 1):
                if (index, side) not in faces:
                    continue
                flat, coeffs = _trace_interpolation(space, index, side, normal_data)
                fixed[flat] = True
                values[flat] = coeffs
        free = np.flatnonzero(~fixed)
        fields.append(FieldLayout(name, space, fixed, values, free, offset))
        offset += len(free)

    blocks = []
    row = 0
    for a in range(ndim):
        grid = greville_grid(spaces.velocity[a])
        keep = np.ones(len(grid.points), dtype=bool)
        for side in (0, 1):
            if (a, side) in faces:
                keep &= ~grid.face_mask(a, side)
        rows = np.flatnonzero(keep)
        blocks.append(EquationBlock(f"{AXIS_NAMES[a]}-mom", "momentum", a, grid, rows, row))
        row += len(rows)
    grid = greville_grid(spaces.pres)
    blocks.append(EquationBlock("continuity", "continuity", -1, grid,
                                np.arange(len(grid.points)), row))
    row += len(grid.points)
    if formulation == "vvp":
        for c, space in enumerate(spaces.vorticity):
            grid = greville_grid(space)
            name = "constitutive" if ndim == 2 else f"constitutive-{AXIS_NAMES[c]}"
            blocks.append(EquationBlock(name, "constitutive", c if ndim == 3 else -1, grid,
                                        np.arange(len(grid.points)), row))
            row += len(grid.points)

    weights = basis_integrals(spaces.pres.knot_vectors[0])
    for kv in spaces.pres.knot_vectors[1:]:
        weights = np.kron(basis_integrals(kv), weights)

    dof_map = DofMap(spaces, formulation, tuple(fields), tuple(blocks), faces, gauge, weights)
    if dof_map.n_unknowns != dof_map.n_equations:
        raise AssemblyError(
            f"non-square system: {dof_map.n_unknowns} unknowns, {dof_map.n_equations} equations"
        )
    logger.debug("DOF map %s %dD: %d unknowns (%d fixed)", formulation, ndim,
                 dof_map.n_unknowns, sum(int(f.fixed.sum()) for f in fields))
    return dof_map


class CollocationOperators:
    """Cached evaluation matrices of every field at every equation block."""

    def __init__(self, dof_map: DofMap):
        self.dof_map = dof_map
        self._full: Dict[Tuple[str, str, Tuple[int, ...]], sp.csr_matrix] = {}
        self._free: Dict[Tuple[str, str, Tuple[int, ...]], sp.csr_matrix] = {}

    def full(self, block: EquationBlock, field: str, deriv: Tuple[int, ...]) -> sp.csr_matrix:
        key = (block.name, field, tuple(deriv))
        if key not in self._full:
            space = self.dof_map.field(field).space
            self._full[key] = evaluation_matrix(space, block.points, deriv)
        return self._full[key]

    def free(self, block: EquationBlock, field: str, deriv: Tuple[int, ...]) -> sp.csr_matrix:
        key = (block.name, field, tuple(deriv))
        if key not in self._free:
            layout = self.dof_map.field(field)
            self._free[key] = self.full(block, field, deriv)[:, layout.free].tocsr()
        return self._free[key]


def _scaled(scale, matrix: sp.spmatrix) -> sp.csr_matrix:
    if np.isscalar(scale):
        return (scale * matrix).tocsr()
    return (sp.diags(np.asarray(scale, dtype=float)) @ matrix).tocsr()


class RowAccumulator:
    """
    Residual rows of one block and their Jacobian, built term by term.

    Linear terms contribute scale * E c; bilinear terms a * b contribute
    diag(b) E_a + diag(a) E_b to the Jacobian.
    """

    def __init__(self, ops: CollocationOperators, block: EquationBlock,
                 coeffs: Dict[str, np.ndarray], want_jacobian: bool):
        self.ops = ops
        self.block = block
        self.coeffs = coeffs
        self.want_jacobian = want_jacobian
        self.residual = np.zeros(block.size)
        self.jacobian: Dict[str, sp.csr_matrix] = {}
        self.uses_lambda = False
        self._values: Dict[Tuple[str, Tuple[int, ...]], np.ndarray] = {}

    def value(self, field: str, deriv: Tuple[int, ...]) -> np.ndarray:
        key = (field, tuple(deriv))
        if key not in self._values:
            self._values[key] = self.ops.full(self.block, field, deriv) @ self.coeffs[field]
        return self._values[key]

    def _add_jacobian(self, field: str, matrix: sp.csr_matrix):
        if field in self.jacobian:
            self.jacobian[field] = self.jacobian[field] + matrix
        else:
            self.jacobian[field] = matrix

    def linear(self, field: str, deriv: Tuple[int, ...], scale=1.0):
        self.residual += scale * self.value(field, deriv)
        if self.want_jacobian:
            self._add_jacobian(field, _scaled(scale, self.ops.free(self.block, field, deriv)))

    def product(self, field_a: str, deriv_a: Tuple[int, ...],
                field_b: str, deriv_b: Tuple[int, ...], scale=1.0):
        a = self.value(field_a, deriv_a)
        b = self.value(field_b, deriv_b)
        self.residual += scale * a * b
        if self.want_jacobian:
            self._add_jacobian(field_a, _scaled(scale * b, self.ops.free(self.block, field_a, deriv_a)))
            self._add_jacobian(field_b, _scaled(scale * a, self.ops.free(self.block, field_b, deriv_b)))

    def constant(self, values):
        self.residual += values

    def add_lambda(self, lam: float):
        self.residual += lam
        self.uses_lambda = True

    def matrix(self, dof_map: DofMap) -> sp.csr_matrix:
        parts = []
        for layout in dof_map.fields:
            part = self.jacobian.get(layout.name)
            parts.append(part if part is not None else sp.csr_matrix((self.block.size, layout.n_free)))
        column = np.ones((self.block.size, 1)) if self.uses_lambda else np.zeros((self.block.size, 1))
        parts.append(sp.csr_matrix(column))
        return sp.hstack(parts, format="csr")


@dataclass
class DiscreteSolution:
    """
    Coefficient vectors bound to their spaces.

    Attributes:
        spaces: Spline complex
        formulation: vp or vvp
        coeffs: Field name -> full coefficient vector
        lam: Gauge multiplier
        stokes_only: Nonlinear terms dropped; the pressure unknown is kinematic
    """

    spaces: Spaces
    formulation: str
    coeffs: Dict[str, np.ndarray]
    lam: float = 0.0
    stokes_only: bool = False

    def __post_init__(self):
        spaces = self.spaces.field_spaces()
        required = list(VELOCITY_NAMES[:self.ndim]) + ["p"]
        if self.formulation == "vvp":
            required += list(vorticity_names(self.ndim))
        for name in required:
            if name not in self.coeffs:
                raise InvalidInputError(f"missing coefficients for field {name}")
            values = np.asarray(self.coeffs[name], dtype=float).ravel()
            if len(values) != spaces[name].dim:
                raise InvalidInputError(
                    f"field {name}: expected {spaces[name].dim} coefficients, got {len(values)}"
                )
            self.coeffs[name] = values

    @property
    def ndim(self) -> int:
        return self.spaces.ndim

    @property
    def kprime(self) -> int:
        return self.spaces.kprime

    def field(self, name: str, points, deriv: Optional[Sequence[int]] = None) -> np.ndarray:
        space = self.spaces.field_spaces()[name]
        return evaluate(space, self.coeffs[name], points, deriv)

    def _d(self, name: str, points, *axes: int) -> np.ndarray:
        order = [0] * self.ndim
        for axis in axes:
            order[axis] += 1
        return self.field(name, points, order)

    def velocity(self, points) -> np.ndarray:
        return np.stack([self.field(VELOCITY_NAMES[a], points) for a in range(self.ndim)], axis=1)

    def velocity_gradient(self, points) -> np.ndarray:
        """Array [N, i, j] = d u_i / d x_j."""
        d = self.ndim
        return np.stack([
            np.stack([self._d(VELOCITY_NAMES[i], points, j) for j in range(d)], axis=1)
            for i in range(d)
        ], axis=1)

    def divergence(self, points) -> np.ndarray:
        return sum(self._d(VELOCITY_NAMES[a], points, a) for a in range(self.ndim))

    @property
    def uses_total_pressure(self) -> bool:
        return self.formulation == "vvp" and not self.stokes_only

    def pressure(self, points) -> np.ndarray:
        """Kinematic pressure; the rotational form subtracts the kinetic term."""
        p = self.field("p", points)
        if self.uses_total_pressure:
            u = self.velocity(points)
            p = p - 0.5 * np.sum(u * u, axis=1)
        return p

    def pressure_gradient(self, points) -> np.ndarray:
        grad = np.stack([self._d("p", points, a) for a in range(self.ndim)], axis=1)
        if self.uses_total_pressure:
            u = self.velocity(points)
            grad = grad - np.einsum("nij,ni->nj", self.velocity_gradient(points), u)
        return grad

    def vorticity(self, points) -> np.ndarray:
        """Scalar vorticity in 2D, (N, 3) in 3D."""
        if self.formulation == "vvp":
            names = vorticity_names(self.ndim)
            if self.ndim == 2:
                return self.field(names[0], points)
            return np.stack([self.field(n, points) for n in names], axis=1)
        g = self.velocity_gradient(points)
        if self.ndim == 2:
            return g[:, 1, 0] - g[:, 0, 1]
        return np.stack([g[:, 2, 1] - g[:, 1, 2], g[:, 0, 2] - g[:, 2, 0], g[:, 1, 0] - g[:, 0, 1]], axis=1)

    def vorticity_gradient(self, points) -> np.ndarray:
        """(N, 2) in 2D, [N, c, j] = d omega_c / d x_j in 3D."""
        d = self.ndim
        if self.formulation == "vvp":
            names = vorticity_names(d)
            grads = [np.stack([self._d(n, points, j) for j in range(d)], axis=1) for n in names]
            return grads[0] if d == 2 else np.stack(grads, axis=1)

        def second(i, a, b):
            return self._d(VELOCITY_NAMES[i], points, a, b)

        if d == 2:
            return np.stack([second(1, 0, j) - second(0, 1, j) for j in range(2)], axis=1)
        curl_rows = [(2, 1, 1, 2), (0, 2, 2, 0), (1, 0, 0, 1)]
        return np.stack([
            np.stack([second(i, a, j) - second(k, b, j) for j in range(3)], axis=1)
            for i, a, k, b in curl_rows
        ], axis=1)


class CollocationSystem:
    """
    Residual and Jacobian of a collocated problem on a fixed DofMap.

    Subclasses implement `_assemble_blocks`, returning one RowAccumulator per
    equation block in residual order.
    """

    solution_class = DiscreteSolution

    def __init__(self, dof_map: DofMap, stokes_only: bool = False):
        self.dof_map = dof_map
        self.ops = CollocationOperators(dof_map)
        self.stokes_only = stokes_only

    @property
    def spaces(self) -> Spaces:
        return self.dof_map.spaces

    def _make_solution(self, coeffs: Dict[str, np.ndarray], lam: float) -> DiscreteSolution:
        return self.solution_class(self.spaces, self.dof_map.formulation, coeffs,
                                   lam, self.stokes_only)

    def initial_solution(self) -> DiscreteSolution:
        """Zero fields with the BC-fixed coefficients applied."""
        return self._make_solution({f.name: f.fixed_values.copy() for f in self.dof_map.fields}, 0.0)

    def to_solution(self, x: np.ndarray) -> DiscreteSolution:
        coeffs, lam = self.dof_map.scatter(x)
        return self._make_solution(coeffs, lam)

    def to_vector(self, solution: DiscreteSolution) -> np.ndarray:
        return self.dof_map.gather(solution.coeffs, solution.lam)

    def _assemble_blocks(self, coeffs: Dict[str, np.ndarray], lam: float,
                         want_jacobian: bool) -> List[RowAccumulator]:
        raise NotImplementedError

    def _gauge(self, coeffs: Dict[str, np.ndarray]) -> Tuple[float, sp.csr_matrix]:
        dof_map = self.dof_map
        pressure = dof_map.field("p")
        weights = dof_map.gauge_weights if dof_map.gauge == "mean" else np.eye(1, pressure.space.dim)[0]
        row = np.zeros(dof_map.n_unknowns)
        row[pressure.unknowns] = weights[pressure.free]
        return float(weights @ coeffs["p"]), sp.csr_matrix(row)

    def assemble(self, solution: DiscreteSolution, want_jacobian: bool = True):
        """
        Evaluate the collocated residual at a solution.

        Args:
            solution: Current iterate (fixed coefficients are taken from the DofMap)
            want_jacobian: Also build the exact sparse Jacobian

        Returns:
            residual, or (residual, Jacobian) when want_jacobian is set
        """
        coeffs, lam = self.dof_map.scatter(self.to_vector(solution))
        blocks = self._assemble_blocks(coeffs, lam, want_jacobian)
        gauge_value, gauge_row = self._gauge(coeffs)
        residual = np.concatenate([acc.residual for acc in blocks] + [[gauge_value]])
        if not want_jacobian:
            return residual
        jacobian = sp.vstack([acc.matrix(self.dof_map) for acc in blocks] + [gauge_row], format="csr")
        return residual, jacobian

    def residual_and_jacobian(self, x: np.ndarray, want_jacobian: bool = True):
        """Newton callback on the unknown vector."""
        return self.assemble(self.to_solution(x), want_jacobian)

    # Row kernels shared by the 2D and 3D square-domain systems

    def _momentum_vp(self, block: EquationBlock, coeffs, nu: float, penalty: float,
                     forcing: np.ndarray, dirichlet, want_jacobian: bool) -> RowAccumulator:
        d = self.dof_map.ndim
        a = block.component
        name = VELOCITY_NAMES[a]
        acc = RowAccumulator(self.ops, block, coeffs, want_jacobian)
        for b in range(d):
            order = [0] * d
            order[b] = 2
            acc.linear(name, tuple(order), -nu)
        if not self.stokes_only:
            for b in range(d):
                order = [0] * d
                order[b] = 1
                acc.product(VELOCITY_NAMES[b], (0,) * d, name, tuple(order))
        order = [0] * d
        order[a] = 1
        acc.linear("p", tuple(order))
        acc.constant(-forcing[:, a])

        weight = np.zeros(block.size)
        for face in self.dof_map.dirichlet_faces:
            if face[0] != a:
                weight[block.on_face(face)] += (penalty / block.spacing(face)) ** 2
        on_boundary = weight > 0.0
        if np.any(on_boundary):
            acc.linear(name, (0,) * d, weight)
            g = np.zeros(block.size)
            g[on_boundary] = dirichlet(block.points[on_boundary])[:, a]
            acc.constant(-weight * g)
        return acc

    def _continuity(self, block: EquationBlock, coeffs, lam: float,
                    want_jacobian: bool) -> RowAccumulator:
        d = self.dof_map.ndim
        acc = RowAccumulator(self.ops, block, coeffs, want_jacobian)
        for a in range(d):
            order = [0] * d
            order[a] = 1
            acc.linear(VELOCITY_NAMES[a], tuple(order))
        acc.add_lambda(lam)
        return acc
