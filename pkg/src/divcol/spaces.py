"""
Tensor-product spline spaces and the compatible de Rham complexes.

Coefficients of a tensor space are ordered lexicographically with x
fastest, then y, then z. Every module in the package shares this order.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, UnsupportedDegreeError
from .splines import (
    KnotVector,
    basis_table,
    derivative_knot_vector,
    derivative_matrix,
    greville_abscissae,
    make_open_knot_vector,
)

logger = logging.getLogger(__name__)

Face = Tuple[int, int]  # (axis, side) with side 0 = lower, 1 = upper


@dataclass(frozen=True)
class TensorSpace:
    """
    Tensor product of univariate spline spaces.

    Attributes:
        knot_vectors: One KnotVector per direction (x first)
    """

    knot_vectors: Tuple[KnotVector, ...]

    def __post_init__(self):
        if not 1 <= len(self.knot_vectors) <= 3:
            raise InvalidInputError(
                f"tensor spaces have 1 to 3 directions, got {len(self.knot_vectors)}"
            )
        object.__setattr__(self, "knot_vectors", tuple(self.knot_vectors))

    @property
    def ndim(self) -> int:
        return len(self.knot_vectors)

    @property
    def shape(self) -> Tuple[int, ...]:
        """Basis count per direction, x first."""
        return tuple(kv.n for kv in self.knot_vectors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(kv.degree for kv in self.knot_vectors)

    def reduced(self, axis: int) -> "TensorSpace":
        """Space with direction `axis` replaced by its derivative space."""
        kvs = list(self.knot_vectors)
        kvs[axis] = derivative_knot_vector(kvs[axis])
        return TensorSpace(tuple(kvs))

    def without(self, axis: int) -> "TensorSpace":
        """Trace space on a face normal to `axis`."""
        return TensorSpace(tuple(kv for a, kv in enumerate(self.knot_vectors) if a != axis))

    def multi_index(self, flat: np.ndarray) -> np.ndarray:
        """Per-direction indices (columns x, y, z) of flat coefficient indices."""
        return np.stack(np.unravel_index(np.asarray(flat), self.shape[::-1])[::-1], axis=1)

    def flat_index(self, multi: np.ndarray) -> np.ndarray:
        multi = np.asarray(multi)
        return np.ravel_multi_index(tuple(multi[:, a] for a in reversed(range(self.ndim))), self.shape[::-1])


@dataclass(frozen=True)
class FieldSample:
    """
    Value and derivatives of a scalar field at one point.

    Attributes:
        value: Field value
        gradient: Partial derivatives, shape (d,)
        second_derivs: Hessian, shape (d, d), only when requested
    """

    value: float
    gradient: np.ndarray
    second_derivs: Optional[np.ndarray] = None


@dataclass(frozen=True)
class GrevilleGrid:
    """
    Tensor grid of Greville points of a space.

    Attributes:
        space: The space whose Greville abscissae were tensorised
        points: Coordinates, shape (dim, d), lexicographic with x fastest
        indices: Per-direction multi-indices, shape (dim, d)
    """

    space: TensorSpace
    points: np.ndarray
    indices: np.ndarray
    abscissae: Tuple[np.ndarray, ...] = field(repr=False)

    def face_mask(self, axis: int, side: int) -> np.ndarray:
        last = self.space.shape[axis] - 1
        return self.indices[:, axis] == (0 if side == 0 else last)

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.points), dtype=bool)
        for axis in range(self.space.ndim):
            mask |= self.face_mask(axis, 0) | self.face_mask(axis, 1)
        return mask

    def faces_of(self, m: int) -> Tuple[Face, ...]:
        """Faces the m-th point lies on (empty tuple for interior points)."""
        faces = []
        for axis, n in enumerate(self.space.shape):
            if self.indices[m, axis] == 0:
                faces.append((axis, 0))
            if self.indices[m, axis] == n - 1:
                faces.append((axis, 1))
        return tuple(faces)

    def spacing(self, axis: int, side: int) -> float:
        """Greville distance between the face and the adjacent point layer."""
        g = self.abscissae[axis]
        return float(g[1] - g[0]) if side == 0 else float(g[-1] - g[-2])


@dataclass(frozen=True)
class ComplexSpaces2D:
    """
    Compatible 2D spaces: psi in S^{k1,k2}, vel_x in S^{k1,k2-1},
    vel_y in S^{k1-1,k2} and pres in S^{k1-1,k2-1}.
    """

    kprime: int
    psi: TensorSpace
    vel_x: TensorSpace
    vel_y: TensorSpace
    pres: TensorSpace

    ndim = 2

    @property
    def velocity(self) -> Tuple[TensorSpace, TensorSpace]:
        return self.vel_x, self.vel_y

    @property
    def vorticity(self) -> Tuple[TensorSpace]:
        return (self.psi,)

    @property
    def breakpoints(self) -> Tuple[np.ndarray, ...]:
        return tuple(kv.breakpoints for kv in self.pres.knot_vectors)

    def field_spaces(self) -> Dict[str, TensorSpace]:
        return {"ux": self.vel_x, "uy": self.vel_y, "p": self.pres, "omega": self.psi}


@dataclass(frozen=True)
class ComplexSpaces3D:
    """
    Compatible 3D spaces: phi, three vorticity spaces (one direction
    reduced), three velocity spaces (two reduced) and the pressure space.
    """

    kprime: int
    phi: TensorSpace
    omega_x: TensorSpace
    omega_y: TensorSpace
    omega_z: TensorSpace
    vel_x: TensorSpace
    vel_y: TensorSpace
    vel_z: TensorSpace
    pres: TensorSpace

    ndim = 3

    @property
    def velocity(self) -> Tuple[TensorSpace, TensorSpace, TensorSpace]:
        return self.vel_x, self.vel_y, self.vel_z

    @property
    def vorticity(self) -> Tuple[TensorSpace, TensorSpace, TensorSpace]:
        return self.omega_x, self.omega_y, self.omega_z

    @property
    def breakpoints(self) -> Tuple[np.ndarray, ...]:
        return tuple(kv.breakpoints for kv in self.pres.knot_vectors)

    def field_spaces(self) -> Dict[str, TensorSpace]:
        return {
            "ux": self.vel_x, "uy": self.vel_y, "uz": self.vel_z, "p": self.pres,
            "omega_x": self.omega_x, "omega_y": self.omega_y, "omega_z": self.omega_z,
        }


def build_complex_2d(kprime: int, breakpoints_x: Sequence[float],
                     breakpoints_y: Sequence[float]) -> ComplexSpaces2D:
    """
    Build the 2D spline complex with k1 = k2 = kprime + 1.

    Args:
        kprime: Pressure degree, at least 1
        breakpoints_x: Breakpoints in x
        breakpoints_y: Breakpoints in y

    Returns:
        ComplexSpaces2D
    """
    if int(kprime) != kprime or kprime < 1:
        raise UnsupportedDegreeError(f"kprime must be >= 1, got {kprime}")
    psi = TensorSpace((
        make_open_knot_vector(kprime + 1, breakpoints_x),
        make_open_knot_vector(kprime + 1, breakpoints_y),
    ))
    vel_x = psi.reduced(1)
    vel_y = psi.reduced(0)
    pres = vel_x.reduced(0)
    logger.debug("2D complex k'=%d: psi %d, vel %d+%d, pres %d",
                 kprime, psi.dim, vel_x.dim, vel_y.dim, pres.dim)
    return ComplexSpaces2D(int(kprime), psi, vel_x, vel_y, pres)


def build_complex_3d(kprime: int, breakpoints_x: Sequence[float],
                     breakpoints_y: Sequence[float],
                     breakpoints_z: Sequence[float]) -> ComplexSpaces3D:
    """
    Build the 3D spline complex with all leading degrees kprime + 1.

    Args:
        kprime: Pressure degree, at least 1
        breakpoints_x: Breakpoints in x
        breakpoints_y: Breakpoints in y
        breakpoints_z: Breakpoints in z

    Returns:
        ComplexSpaces3D
    """
    if int(kprime) != kprime or kprime < 1:
        raise UnsupportedDegreeError(f"kprime must be >= 1, got {kprime}")
    phi = TensorSpace(tuple(
        make_open_knot_vector(kprime + 1, b) for b in (breakpoints_x, breakpoints_y, breakpoints_z)
    ))
    spaces = ComplexSpaces3D(
        kprime=int(kprime),
        phi=phi,
        omega_x=phi.reduced(0),
        omega_y=phi.reduced(1),
        omega_z=phi.reduced(2),
        vel_x=phi.reduced(1).reduced(2),
        vel_y=phi.reduced(0).reduced(2),
        vel_z=phi.reduced(0).reduced(1),
        pres=phi.reduced(0).reduced(1).reduced(2),
    )
    logger.debug("3D complex k'=%d: pres %d, vel %d", kprime, spaces.pres.dim,
                 sum(s.dim for s in spaces.velocity))
    return spaces


def _check_points(space: TensorSpace, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != space.ndim:
        raise InvalidInputError(
            f"points have {points.shape[1]} coordinates, space has {space.ndim} directions"
        )
    return points


def _check_coeffs(space: TensorSpace, coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if len(coeffs) != space.dim:
        raise InvalidInputError(f"expected {space.dim} coefficients, got {len(coeffs)}")
    return coeffs


def local_basis(space: TensorSpace, points, deriv: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Active tensor basis functions at each point.

    Args:
        space: Tensor space
        points: Coordinates, shape (N, d)
        deriv: Derivative order per direction

    Returns:
        (cols, vals), both of shape (N, prod(k_a + 1)): global coefficient
        indices and the corresponding basis derivative values
    """
    points = _check_points(space, points)
    npts = len(points)
    cols = np.zeros((npts, 1), dtype=np.int64)
    vals = np.ones((npts, 1))
    stride = 1
    for axis, kv in enumerate(space.knot_vectors):
        order = int(deriv[axis])
        first, ders = basis_table(kv, points[:, axis], order)
        local = first[:, None] + np.arange(kv.degree + 1)[None, :]
        cols = (cols[:, :, None] + stride * local[:, None, :]).reshape(npts, -1)
        vals = (vals[:, :, None] * ders[:, order, None, :]).reshape(npts, -1)
        stride *= kv.n
    return cols, vals


def evaluation_matrix(space: TensorSpace, points, deriv: Sequence[int]) -> sp.csr_matrix:
    """Sparse matrix mapping coefficients to a derivative at the points."""
    cols, vals = local_basis(space, points, deriv)
    npts, width = cols.shape
    rows = np.repeat(np.arange(npts), width)
    return sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(npts, space.dim))


def evaluate(space: TensorSpace, coeffs, points, deriv: Optional[Sequence[int]] = None) -> np.ndarray:
    """Evaluate a field (or one of its partial derivatives) at many points."""
    coeffs = _check_coeffs(space, coeffs)
    if deriv is None:
        deriv = (0,) * space.ndim
    cols, vals = local_basis(space, points, deriv)
    return np.sum(vals * coeffs[cols], axis=1)


def _unit(ndim: int, *axes: int) -> Tuple[int, ...]:
    order = [0] * ndim
    for axis in axes:
        order[axis] += 1
    return tuple(order)


def eval_field(space: TensorSpace, coeffs, point, max_deriv: int = 1) -> FieldSample:
    """
    Evaluate a scalar spline field and its derivatives at one point.

    Args:
        space: Tensor space
        coeffs: Coefficients, length space.dim
        point: Parametric point in [0, 1]^d
        max_deriv: 0, 1 or 2; second derivatives only for 2

    Returns:
        FieldSample
    """
    if max_deriv not in (0, 1, 2):
        raise InvalidInputError(f"max_deriv must be 0, 1 or 2, got {max_deriv}")
    coeffs = _check_coeffs(space, coeffs)
    point = _check_points(space, point)[:1]
    d = space.ndim
    value = float(evaluate(space, coeffs, point)[0])
    gradient = np.array([evaluate(space, coeffs, point, _unit(d, a))[0] for a in range(d)])
    hessian = None
    if max_deriv == 2:
        hessian = np.empty((d, d))
        for a in range(d):
            for b in range(a, d):
                hessian[a, b] = hessian[b, a] = evaluate(space, coeffs, point, _unit(d, a, b))[0]
    return FieldSample(value=value, gradient=gradient, second_derivs=hessian)


def greville_grid(space: TensorSpace) -> GrevilleGrid:
    """
    Tensor grid of Greville points with multi-indices.

    Args:
        space: Tensor space with all degrees >= 1

    Returns:
        GrevilleGrid with space.dim points, x fastest
    """
    abscissae = tuple(greville_abscissae(kv) for kv in space.knot_vectors)
    indices = space.multi_index(np.arange(space.dim))
    points = np.stack([abscissae[a][indices[:, a]] for a in range(space.ndim)], axis=1)
    return GrevilleGrid(space=space, points=points, indices=indices, abscissae=abscissae)


@lru_cache(maxsize=256)
def partial_matrix(space: TensorSpace, axis: int) -> Tuple[sp.csr_matrix, TensorSpace]:
    """
    Exact coefficient map of d/dx_axis.

    Returns:
        (matrix, target space) where target = space.reduced(axis)
    """
    factors = [sp.identity(kv.n, format="csr") for kv in space.knot_vectors]
    factors[axis] = derivative_matrix(space.knot_vectors[axis])
    op = factors[0]
    for factor in factors[1:]:
        op = sp.kron(factor, op, format="csr")
    return op.tocsr(), space.reduced(axis)


def divergence_coeffs_2d(spaces: ComplexSpaces2D, ux_coeffs, uy_coeffs) -> np.ndarray:
    """
    Pressure-space coefficients of du_x/dx + du_y/dy.

    Args:
        spaces: 2D complex
        ux_coeffs: Coefficients in vel_x
        uy_coeffs: Coefficients in vel_y

    Returns:
        Coefficients in pres
    """
    ux = _check_coeffs(spaces.vel_x, ux_coeffs)
    uy = _check_coeffs(spaces.vel_y, uy_coeffs)
    dx, _ = partial_matrix(spaces.vel_x, 0)
    dy, _ = partial_matrix(spaces.vel_y, 1)
    return dx @ ux + dy @ uy


def rotor_coeffs_2d(spaces: ComplexSpaces2D, psi_coeffs) -> Tuple[np.ndarray, np.ndarray]:
    """Velocity coefficients of (dpsi/dy, -dpsi/dx)."""
    psi = _check_coeffs(spaces.psi, psi_coeffs)
    dx, _ = partial_matrix(spaces.psi, 0)
    dy, _ = partial_matrix(spaces.psi, 1)
    return dy @ psi, -(dx @ psi)


def grad_coeffs_3d(spaces: ComplexSpaces3D, phi_coeffs) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    phi = _check_coeffs(spaces.phi, phi_coeffs)
    return tuple(partial_matrix(spaces.phi, a)[0] @ phi for a in range(3))


def curl_coeffs_3d(spaces: ComplexSpaces3D, omega_coeffs) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Velocity-space coefficients of the curl of a vorticity-space field.

    Args:
        spaces: 3D complex
        omega_coeffs: Three coefficient vectors in omega_x, omega_y, omega_z

    Returns:
        Coefficients in vel_x, vel_y, vel_z
    """
    if len(omega_coeffs) != 3:
        raise InvalidInputError("expected three vorticity components")
    wx = _check_coeffs(spaces.omega_x, omega_coeffs[0])
    wy = _check_coeffs(spaces.omega_y, omega_coeffs[1])
    wz = _check_coeffs(spaces.omega_z, omega_coeffs[2])

    def d(space, axis, c):
        return partial_matrix(space, axis)[0] @ c

    ux = d(spaces.omega_z, 1, wz) - d(spaces.omega_y, 2, wy)
    uy = d(spaces.omega_x, 2, wx) - d(spaces.omega_z, 0, wz)
    uz = d(spaces.omega_y, 0, wy) - d(spaces.omega_x, 1, wx)
    return ux, uy, uz


def divergence_coeffs_3d(spaces: ComplexSpaces3D, ux_coeffs, uy_coeffs, uz_coeffs) -> np.ndarray:
    comps = (ux_coeffs, uy_coeffs, uz_coeffs)
    total = np.zeros(spaces.pres.dim)
    for axis, (space, c) in enumerate(zip(spaces.velocity, comps)):
        total += partial_matrix(space, axis)[0] @ _check_coeffs(space, c)
    return total
