"""
Geometry maps, Piola pull-backs and the mapped 2D VVP Stokes system.

Unknowns live on the parametric unit square. Velocity is pulled back with
the contravariant Piola map u_hat = J DF^-1 (u o F), pressure as a density
p_hat = J (p o F) and vorticity as a scalar w_hat = w o F, so parametric
divergence-free fields push forward to physical divergence-free fields.
"""

import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from .colloc2d import DiscreteSolution2D, VectorField, zero_field
from .dofs import (
    GAUGES,
    CollocationSystem,
    DofMap,
    RowAccumulator,
    all_faces,
    build_dof_map as _build_dof_map,
    default_penalty,
    outward_normal,
)
from .errors import InvalidGeometryError, InvalidInputError
from .spaces import ComplexSpaces2D, Face, build_complex_2d
from .splines import stretched_breakpoints, uniform_breakpoints

logger = logging.getLogger(__name__)

EDGE_KINDS = ("dirichlet", "pressure_neumann")
WAVY_PRESETS = ((1.0, 0.75, 1.0), (0.25, 0.3, 3.0), (0.25, 0.3, 5.0))

_SINGULAR_J = 1e-14


def _as_points(xi) -> np.ndarray:
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    if xi.ndim != 2 or xi.shape[1] != 2:
        raise InvalidInputError(f"expected parametric points of shape (N, 2), got {xi.shape}")
    return xi


@dataclass(frozen=True)
class MapMetrics:
    """
    Map quantities at a set of parametric points.

    Attributes:
        xi: Parametric points (N, 2)
        x: Physical points F(xi)
        DF: [n, i, j] = dF_i / dxi_j
        D2F: [n, i, j, k] = d2F_i / dxi_j dxi_k
        J: det DF
        dJ: [n, k] = dJ / dxi_k
    """

    xi: np.ndarray
    x: np.ndarray
    DF: np.ndarray
    D2F: np.ndarray
    J: np.ndarray
    dJ: np.ndarray

    @cached_property
    def Jinv(self) -> np.ndarray:
        return 1.0 / self.J

    @cached_property
    def dJinv(self) -> np.ndarray:
        return -self.dJ / (self.J ** 2)[:, None]

    @cached_property
    def DF_inv(self) -> np.ndarray:
        return np.linalg.inv(self.DF)

    @cached_property
    def C(self) -> np.ndarray:
        return np.einsum("nia,nib->nab", self.DF, self.DF)

    @cached_property
    def C_inv(self) -> np.ndarray:
        return np.linalg.inv(self.C)

    @cached_property
    def dC(self) -> np.ndarray:
        """[n, a, b, k] = dC_ab / dxi_k."""
        return (np.einsum("niak,nib->nabk", self.D2F, self.DF)
                + np.einsum("nia,nibk->nabk", self.DF, self.D2F))


class GeometryMap2D(ABC):
    """
    Smooth map F from the parametric unit square onto a physical domain.

    Subclasses supply F, DF and D2F in closed form; J, C and their
    derivatives are derived from those.
    """

    name = "map"

    @abstractmethod
    def F(self, xi) -> np.ndarray:
        """Physical points, (N, 2)."""

    @abstractmethod
    def DF(self, xi) -> np.ndarray:
        """[n, i, j] = dF_i / dxi_j."""

    @abstractmethod
    def D2F(self, xi) -> np.ndarray:
        """[n, i, j, k] = d2F_i / dxi_j dxi_k."""

    def J(self, xi) -> np.ndarray:
        d = self.DF(xi)
        return d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]

    def C(self, xi) -> np.ndarray:
        d = self.DF(xi)
        return np.einsum("nia,nib->nab", d, d)

    def metrics(self, xi) -> MapMetrics:
        xi = _as_points(xi)
        d = self.DF(xi)
        d2 = self.D2F(xi)
        jac = d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0]
        dj = np.stack([
            d2[:, 0, 0, k] * d[:, 1, 1] + d[:, 0, 0] * d2[:, 1, 1, k]
            - d2[:, 0, 1, k] * d[:, 1, 0] - d[:, 0, 1] * d2[:, 1, 0, k]
            for k in range(2)
        ], axis=1)
        return MapMetrics(xi, self.F(xi), d, d2, jac, dj)

    def check_orientation(self, samples: int = 41):
        """Raise InvalidGeometryError unless J > 0 on a closed sample grid."""
        s = np.linspace(0.0, 1.0, samples)
        xi = np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1).reshape(-1, 2)
        jac = self.J(xi)
        if not np.all(np.isfinite(jac)) or np.min(jac) <= 0.0:
            worst = int(np.argmin(jac))
            raise InvalidGeometryError(
                f"{self.describe()}: non-positive Jacobian {jac[worst]:.3e} at xi = {xi[worst].tolist()}"
            )

    def describe(self) -> str:
        return self.name


class IdentityMap(GeometryMap2D):
    name = "identity"

    def F(self, xi):
        return _as_points(xi).copy()

    def DF(self, xi):
        n = len(_as_points(xi))
        return np.broadcast_to(np.eye(2), (n, 2, 2)).copy()

    def D2F(self, xi):
        return np.zeros((len(_as_points(xi)), 2, 2, 2))


class PolarMap(GeometryMap2D):
    """
    Annular sector F = R (sin(S xi1), cos(S xi1)) with R = (r_out - r_in) xi2 + r_in.

    Args:
        r_in: Inner radius
        r_out: Outer radius
        sweep: Angle S covered by xi1 in [0, 1]
    """

    name = "polar"

    def __init__(self, r_in: float, r_out: float, sweep: float = 2.0 * np.pi):
        if not (0.0 < r_in < r_out) or not np.isfinite(r_out):
            raise InvalidInputError(f"polar map needs 0 < r_in < r_out, got ({r_in}, {r_out})")
        if not 0.0 < sweep <= 2.0 * np.pi:
            raise InvalidInputError(f"sweep must lie in (0, 2 pi], got {sweep}")
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        self.sweep = float(sweep)

    def _polar(self, xi):
        xi = _as_points(xi)
        radius = (self.r_out - self.r_in) * xi[:, 1] + self.r_in
        theta = self.sweep * xi[:, 0]
        return radius, np.sin(theta), np.cos(theta)

    def F(self, xi):
        r, s, c = self._polar(xi)
        return np.stack([r * s, r * c], axis=1)

    def DF(self, xi):
        r, s, c = self._polar(xi)
        dr, k = self.r_out - self.r_in, self.sweep
        out = np.empty((len(r), 2, 2))
        out[:, 0, 0] = k * r * c
        out[:, 0, 1] = dr * s
        out[:, 1, 0] = -k * r * s
        out[:, 1, 1] = dr * c
        return out

    def D2F(self, xi):
        r, s, c = self._polar(xi)
        dr, k = self.r_out - self.r_in, self.sweep
        out = np.zeros((len(r), 2, 2, 2))
        out[:, 0, 0, 0] = -k * k * r * s
        out[:, 0, 0, 1] = out[:, 0, 1, 0] = dr * k * c
        out[:, 1, 0, 0] = -k * k * r * c
        out[:, 1, 0, 1] = out[:, 1, 1, 0] = -dr * k * s
        return out

    def describe(self) -> str:
        return f"polar({self.r_in:g},{self.r_out:g},{self.sweep:.6g})"


class WavyMap(GeometryMap2D):
    """
    Cavity with a sinusoidal bottom wall,
    F = (xi1, A (B (1 - xi2) sin(C pi xi1) + xi2)).
    """

    name = "wavy"

    def __init__(self, a: float, b: float, c: float):
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)
        self.check_orientation()

    def F(self, xi):
        xi = _as_points(xi)
        wave = np.sin(self.c * np.pi * xi[:, 0])
        return np.stack([xi[:, 0], self.a * (self.b * (1.0 - xi[:, 1]) * wave + xi[:, 1])], axis=1)

    def DF(self, xi):
        xi = _as_points(xi)
        k = self.c * np.pi
        out = np.zeros((len(xi), 2, 2))
        out[:, 0, 0] = 1.0
        out[:, 1, 0] = self.a * self.b * (1.0 - xi[:, 1]) * k * np.cos(k * xi[:, 0])
        out[:, 1, 1] = self.a * (1.0 - self.b * np.sin(k * xi[:, 0]))
        return out

    def D2F(self, xi):
        xi = _as_points(xi)
        k = self.c * np.pi
        out = np.zeros((len(xi), 2, 2, 2))
        out[:, 1, 0, 0] = -self.a * self.b * (1.0 - xi[:, 1]) * k * k * np.sin(k * xi[:, 0])
        out[:, 1, 0, 1] = out[:, 1, 1, 0] = -self.a * self.b * k * np.cos(k * xi[:, 0])
        return out

    def describe(self) -> str:
        return f"wavy({self.a:g},{self.b:g},{self.c:g})"


def identity_map() -> IdentityMap:
    return IdentityMap()


def polar_map(r_in: float, r_out: float, sweep: float = 2.0 * np.pi) -> PolarMap:
    """
    Polar map of an annulus (or annular sector when sweep < 2 pi).

    Args:
        r_in: Inner radius, positive
        r_out: Outer radius, larger than r_in
        sweep: Angular extent

    Returns:
        PolarMap with J = sweep R (r_out - r_in)
    """
    return PolarMap(r_in, r_out, sweep)


def wavy_map(a: float, b: float, c: float) -> WavyMap:
    """Wavy-bottom cavity; raises InvalidGeometryError when J <= 0 is sampled."""
    return WavyMap(a, b, c)


_MAP_PATTERN = re.compile(r"^\s*(identity|polar|wavy)\s*(?:\(([^)]*)\))?\s*$")


def map_from_name(text: str) -> GeometryMap2D:
    """
    Parse identity, polar(r_in,r_out[,sweep]) or wavy(A,B,C).

    Raises:
        InvalidInputError: Unknown name or wrong argument count
    """
    match = _MAP_PATTERN.match(text or "")
    if not match:
        raise InvalidInputError(f"unknown geometry map {text!r}")
    kind, raw = match.group(1), match.group(2)
    try:
        args = [float(a) for a in raw.split(",")] if raw and raw.strip() else []
    except ValueError as e:
        raise InvalidInputError(f"bad geometry map arguments in {text!r}") from e
    if kind == "identity" and not args:
        return identity_map()
    if kind == "polar" and len(args) in (2, 3):
        return polar_map(*args)
    if kind == "wavy" and len(args) == 3:
        return wavy_map(*args)
    raise InvalidInputError(f"wrong number of arguments for geometry map {text!r}")


def _checked_metrics(geometry: GeometryMap2D, xi) -> MapMetrics:
    metrics = geometry.metrics(xi)
    if not np.all(np.isfinite(metrics.J)) or np.min(np.abs(metrics.J)) <= _SINGULAR_J:
        raise InvalidGeometryError(f"{geometry.describe()}: singular Jacobian at sample points")
    return metrics


def pullback_fields(geometry: GeometryMap2D, xi, velocity=None, pressure=None, vorticity=None):
    """
    Pull physical fields sampled at F(xi) back to the parametric domain.

    Args:
        geometry: The map
        xi: Parametric points (N, 2)
        velocity: Physical velocity (N, 2) or None
        pressure: Physical pressure (N,) or None
        vorticity: Physical vorticity (N,) or None

    Returns:
        (u_hat, p_hat, w_hat); entries are None where the input was None
    """
    m = _checked_metrics(geometry, xi)
    u_hat = p_hat = w_hat = None
    if velocity is not None:
        u_hat = m.J[:, None] * np.einsum("nij,nj->ni", m.DF_inv, np.asarray(velocity, dtype=float))
    if pressure is not None:
        p_hat = m.J * np.asarray(pressure, dtype=float)
    if vorticity is not None:
        w_hat = np.array(vorticity, dtype=float)
    return u_hat, p_hat, w_hat


def pushforward_fields(geometry: GeometryMap2D, xi, velocity=None, pressure=None, vorticity=None):
    """Inverse of pullback_fields."""
    m = _checked_metrics(geometry, xi)
    u = p = w = None
    if velocity is not None:
        u = m.Jinv[:, None] * np.einsum("nij,nj->ni", m.DF, np.asarray(velocity, dtype=float))
    if pressure is not None:
        p = m.Jinv * np.asarray(pressure, dtype=float)
    if vorticity is not None:
        w = np.array(vorticity, dtype=float)
    return u, p, w


@dataclass(frozen=True)
class MappedStokesCase:
    """
    Stokes problem on a mapped 2D domain.

    Attributes:
        geometry: Map from the parametric square
        nu: Kinematic viscosity
        spaces: Parametric spline complex
        forcing: Physical body force, evaluated at physical points
        dirichlet: Physical boundary velocity g, evaluated at physical points
        edges: Parametric face -> dirichlet or pressure_neumann
        penalty_constant: C_pen, defaults to 5 (k' + 1)
        gauge: mean or pin
        name: Label
    """

    geometry: GeometryMap2D
    nu: float
    spaces: ComplexSpaces2D
    forcing: VectorField = zero_field
    dirichlet: VectorField = zero_field
    edges: Dict[Face, str] = field(default_factory=lambda: {f: "dirichlet" for f in all_faces(2)})
    penalty_constant: Optional[float] = None
    gauge: str = "mean"
    name: str = "mapped"

    def __post_init__(self):
        if not self.nu > 0.0:
            raise InvalidInputError(f"nu must be positive, got {self.nu}")
        if self.penalty_constant is not None and not self.penalty_constant > 0.0:
            raise InvalidInputError(f"penalty constant must be positive, got {self.penalty_constant}")
        if self.gauge not in GAUGES:
            raise InvalidInputError(f"unknown gauge {self.gauge!r}")
        edges = {tuple(face): kind for face, kind in dict(self.edges).items()}
        missing = all_faces(2) - set(edges)
        if missing:
            raise InvalidInputError(f"no boundary condition on edges {sorted(missing)}")
        extra = set(edges) - all_faces(2)
        if extra:
            raise InvalidInputError(f"unknown edges {sorted(extra)}")
        for face, kind in edges.items():
            if kind not in EDGE_KINDS:
                raise InvalidInputError(f"edge {face}: unknown condition {kind!r}")
        object.__setattr__(self, "edges", edges)

    @property
    def penalty(self) -> float:
        if self.penalty_constant is None:
            return default_penalty(self.spaces.kprime)
        return float(self.penalty_constant)

    @property
    def dirichlet_faces(self) -> FrozenSet[Face]:
        return frozenset(f for f, kind in self.edges.items() if kind == "dirichlet")

    @property
    def neumann_faces(self) -> FrozenSet[Face]:
        return frozenset(f for f, kind in self.edges.items() if kind == "pressure_neumann")

    def pulled_back_forcing(self, xi) -> np.ndarray:
        """f_hat = J DF^-1 f(F(xi))."""
        m = self.geometry.metrics(xi)
        return pullback_fields(self.geometry, xi, velocity=self.forcing(m.x))[0]

    def pulled_back_dirichlet(self, xi) -> np.ndarray:
        m = self.geometry.metrics(xi)
        return pullback_fields(self.geometry, xi, velocity=self.dirichlet(m.x))[0]


@dataclass
class MappedSolution(DiscreteSolution2D):
    """
    Parametric coefficients of a mapped solution with physical evaluation.

    The plain field accessors (velocity, pressure, ...) return parametric
    values; the physical_* methods push them forward.
    """

    geometry: Optional[GeometryMap2D] = None

    def _metrics(self, xi) -> MapMetrics:
        if self.geometry is None:
            raise InvalidInputError("solution carries no geometry map")
        return _checked_metrics(self.geometry, xi)

    def physical_points(self, xi) -> np.ndarray:
        return self._metrics(xi).x

    def physical_velocity(self, xi) -> np.ndarray:
        m = self._metrics(xi)
        return m.Jinv[:, None] * np.einsum("nij,nj->ni", m.DF, self.velocity(xi))

    def physical_velocity_gradient(self, xi) -> np.ndarray:
        """[N, i, j] = d u_i / d x_j of the pushed-forward velocity."""
        m = self._metrics(xi)
        u_hat = self.velocity(xi)
        du_hat = self.velocity_gradient(xi)
        piola = np.einsum("nij,nj->ni", m.DF, u_hat)
        d_param = (m.dJinv[:, None, :] * piola[:, :, None]
                   + m.Jinv[:, None, None] * (np.einsum("nijk,nj->nik", m.D2F, u_hat)
                                              + np.einsum("nij,njk->nik", m.DF, du_hat)))
        return np.einsum("nik,nkm->nim", d_param, m.DF_inv)

    def physical_divergence(self, xi) -> np.ndarray:
        return self._metrics(xi).Jinv * self.divergence(xi)

    def physical_pressure(self, xi) -> np.ndarray:
        return self._metrics(xi).Jinv * self.field("p", xi)

    def physical_pressure_gradient(self, xi) -> np.ndarray:
        m = self._metrics(xi)
        p_hat = self.field("p", xi)
        dp_hat = np.stack([self.field("p", xi, (1, 0)), self.field("p", xi, (0, 1))], axis=1)
        d_param = m.dJinv * p_hat[:, None] + m.Jinv[:, None] * dp_hat
        return np.einsum("nk,nkm->nm", d_param, m.DF_inv)

    def physical_vorticity(self, xi) -> np.ndarray:
        return self.vorticity(xi)

    def physical_vorticity_gradient(self, xi) -> np.ndarray:
        m = self._metrics(xi)
        return np.einsum("nk,nkm->nm", self.vorticity_gradient(xi), m.DF_inv)


def build_mapped_dof_map(case: MappedStokesCase) -> DofMap:
    """
    DOF map with the parametric normal component of J DF^-1 g imposed on
    Dirichlet edges; pressure-Neumann edges keep their normal velocity free.
    """
    def normal_data(axis, side, xi):
        return case.pulled_back_dirichlet(xi)[:, axis]

    return _build_dof_map(case.spaces, "vvp", normal_data,
                          dirichlet_faces=case.dirichlet_faces, gauge=case.gauge)


class MappedCollocationSystem(CollocationSystem):
    """Mapped VVP Stokes rows over the parametric complex."""

    solution_class = MappedSolution

    def __init__(self, case: MappedStokesCase, dof_map: Optional[DofMap] = None):
        super().__init__(dof_map or build_mapped_dof_map(case), stokes_only=True)
        self.case = case
        self._metrics: Dict[str, MapMetrics] = {}
        for block in self.dof_map.blocks:
            metrics = case.geometry.metrics(block.points)
            if not np.all(np.isfinite(metrics.J)) or np.min(metrics.J) <= _SINGULAR_J:
                worst = int(np.argmin(metrics.J))
                raise InvalidGeometryError(
                    f"{case.geometry.describe()}: Jacobian {metrics.J[worst]:.3e} at collocation "
                    f"point {block.points[worst].tolist()} of block {block.name}"
                )
            self._metrics[block.name] = metrics
        self._forcing = {
            block.name: pullback_fields(
                case.geometry, block.points,
                velocity=np.asarray(case.forcing(self._metrics[block.name].x), dtype=float),
            )[0]
            for block in self.dof_map.blocks if block.kind == "momentum"
        }
        logger.debug("Mapped system on %s: %d unknowns", case.geometry.describe(), self.dof_map.n_unknowns)

    def _make_solution(self, coeffs, lam) -> MappedSolution:
        return MappedSolution(self.spaces, "vvp", coeffs, lam, True, self.case.geometry)

    def _assemble_blocks(self, coeffs, lam, want_jacobian) -> List[RowAccumulator]:
        accs = [self._momentum(b, coeffs, want_jacobian) for b in self.dof_map.blocks if b.kind == "momentum"]
        accs.append(self._continuity(self.dof_map.block("continuity"), coeffs, lam, want_jacobian))
        accs.append(self._constitutive(self.dof_map.block("constitutive"), coeffs, want_jacobian))
        return accs

    def _momentum(self, block, coeffs, want_jacobian) -> RowAccumulator:
        # nu (dw/dy, -dw/dx) + J C^-1 grad(J^-1 p_hat) = f_hat
        a = block.component
        m = self._metrics[block.name]
        acc = RowAccumulator(self.ops, block, coeffs, want_jacobian)
        if a == 0:
            acc.linear("omega", (0, 1), self.case.nu)
        else:
            acc.linear("omega", (1, 0), -self.case.nu)
        coef = m.J[:, None] * m.C_inv[:, a, :]
        d_x = coef[:, 0] * m.Jinv
        d_y = coef[:, 1] * m.Jinv
        d_0 = np.sum(coef * m.dJinv, axis=1)

        # Enhanced collocation of dp/dn = 0 on the momentum row normal to a Neumann edge
        for face in sorted(self.case.neumann_faces):
            if face[0] != a:
                continue
            mask = block.on_face(face)
            if not np.any(mask):
                continue
            normal = np.einsum("nki,k->ni", m.DF_inv[mask], outward_normal(face, 2))
            normal /= np.linalg.norm(normal, axis=1)[:, None]
            direction = np.einsum("nkj,nj->nk", m.DF_inv[mask], normal)
            h = block.spacing(face) * np.linalg.norm(m.DF[mask][:, :, face[0]], axis=1)
            weight = self.case.penalty / h
            d_x[mask] += weight * direction[:, 0] * m.Jinv[mask]
            d_y[mask] += weight * direction[:, 1] * m.Jinv[mask]
            d_0[mask] += weight * np.sum(direction * m.dJinv[mask], axis=1)

        acc.linear("p", (1, 0), d_x)
        acc.linear("p", (0, 1), d_y)
        acc.linear("p", (0, 0), d_0)
        acc.constant(-self._forcing[block.name][:, a])
        return acc

    def _constitutive(self, block, coeffs, want_jacobian) -> RowAccumulator:
        # w - J^-1 (d/dx (J^-1 (C u)_2) - d/dy (J^-1 (C u)_1)) = 0
        m = self._metrics[block.name]
        a = m.Jinv[:, None, None] * m.C
        da = m.dJinv[:, None, None, :] * m.C[..., None] + m.Jinv[:, None, None, None] * m.dC
        jinv = m.Jinv
        acc = RowAccumulator(self.ops, block, coeffs, want_jacobian)
        acc.linear("omega", (0, 0))
        acc.linear("ux", (1, 0), -jinv * a[:, 1, 0])
        acc.linear("ux", (0, 1), jinv * a[:, 0, 0])
        acc.linear("uy", (1, 0), -jinv * a[:, 1, 1])
        acc.linear("uy", (0, 1), jinv * a[:, 0, 1])
        scale_x = -jinv * (da[:, 1, 0, 0] - da[:, 0, 0, 1])
        scale_y = -jinv * (da[:, 1, 1, 0] - da[:, 0, 1, 1])

        # (C/h)(u.s - g.s) with the physical tangent of the parametric counter-clockwise direction
        target = np.zeros(block.size)
        for face in sorted(self.case.dirichlet_faces):
            mask = block.on_face(face)
            if not np.any(mask):
                continue
            n_hat = outward_normal(face, 2)
            s_hat = np.array([-n_hat[1], n_hat[0]])
            tangent = np.einsum("nij,j->ni", m.DF[mask], s_hat)
            tangent /= np.linalg.norm(tangent, axis=1)[:, None]
            h = block.spacing(face) * np.linalg.norm(m.DF[mask][:, :, face[0]], axis=1)
            weight = self.case.penalty / h
            scale_x[mask] += weight * jinv[mask] * np.sum(tangent * m.DF[mask][:, :, 0], axis=1)
            scale_y[mask] += weight * jinv[mask] * np.sum(tangent * m.DF[mask][:, :, 1], axis=1)
            g = np.asarray(self.case.dirichlet(m.x[mask]), dtype=float)
            target[mask] += weight * np.sum(g * tangent, axis=1)
        acc.linear("ux", (0, 0), scale_x)
        acc.linear("uy", (0, 0), scale_y)
        acc.constant(-target)
        return acc

    def penalised_faces(self) -> Dict[str, list]:
        neumann = sorted(self.case.neumann_faces)
        return {
            "x-mom": [f for f in neumann if f[0] == 0],
            "y-mom": [f for f in neumann if f[0] == 1],
            "constitutive": sorted(self.case.dirichlet_faces),
        }


def assemble_mapped_vvp_stokes(case: MappedStokesCase, solution: MappedSolution, want_jacobian: bool = True,
                               system: Optional[MappedCollocationSystem] = None):
    """
    Residual (and Jacobian) of the mapped VVP Stokes form.

    Rows: [x-mom, y-mom, continuity (+ lambda), constitutive, gauge].

    Args:
        case: Mapped case
        solution: Parametric iterate
        want_jacobian: Also return the sparse Jacobian
        system: Reusable MappedCollocationSystem of the same case

    Returns:
        residual, or (residual, Jacobian)
    """
    if system is None:
        system = MappedCollocationSystem(case)
    elif system.case is not case:
        raise InvalidInputError("system was built for a different case")
    return system.assemble(solution, want_jacobian)


@dataclass(frozen=True)
class CouetteExact:
    """
    Couette flow between rotating cylinders: inner wall moving
    counter-clockwise at speed U, outer wall at rest.

    u = u_theta(r) (-y, x) / r with u_theta = A r + B / r, p = 0, w = 2A.
    """

    r_in: float
    r_out: float
    U: float = 1.0

    name = "couette"
    ndim = 2

    @property
    def A(self) -> float:
        delta = self.r_in / self.r_out
        return -(self.U / self.r_in) * delta ** 2 / (1.0 - delta ** 2)

    @property
    def B(self) -> float:
        delta = self.r_in / self.r_out
        return (self.U / self.r_in) * self.r_in ** 2 / (1.0 - delta ** 2)

    @property
    def omega(self) -> float:
        return 2.0 * self.A

    def u_theta(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.A * r + self.B / r

    def velocity(self, points) -> np.ndarray:
        points = _as_points(points)
        r2 = np.sum(points ** 2, axis=1)
        f = self.A + self.B / r2
        return np.stack([-f * points[:, 1], f * points[:, 0]], axis=1)

    def velocity_gradient(self, points) -> np.ndarray:
        points = _as_points(points)
        x, y = points[:, 0], points[:, 1]
        r2 = x * x + y * y
        f = self.A + self.B / r2
        # df/dx_j = -2 B x_j / r^4
        fx = -2.0 * self.B * x / r2 ** 2
        fy = -2.0 * self.B * y / r2 ** 2
        grad = np.empty((len(points), 2, 2))
        grad[:, 0, 0] = -fx * y
        grad[:, 0, 1] = -f - fy * y
        grad[:, 1, 0] = f + fx * x
        grad[:, 1, 1] = fy * x
        return grad

    def divergence(self, points) -> np.ndarray:
        g = self.velocity_gradient(points)
        return g[:, 0, 0] + g[:, 1, 1]

    def pressure(self, points) -> np.ndarray:
        return np.zeros(len(_as_points(points)))

    def pressure_gradient(self, points) -> np.ndarray:
        return np.zeros((len(_as_points(points)), 2))

    def vorticity(self, points) -> np.ndarray:
        return np.full(len(_as_points(points)), self.omega)

    def vorticity_gradient(self, points) -> np.ndarray:
        return np.zeros((len(_as_points(points)), 2))

    def dirichlet(self, points) -> np.ndarray:
        return self.velocity(points)


def _breakpoints(num_elements: int, stretched: bool) -> np.ndarray:
    return stretched_breakpoints(num_elements) if stretched else uniform_breakpoints(num_elements)


def couette_case(r_in: float = 1.0, r_out: float = 2.0, U: float = 1.0, kprime: int = 2,
                 num_elements: int = 4, sweep: float = 0.5 * np.pi, nu: float = 1.0,
                 penalty_constant: Optional[float] = None,
                 gauge: str = "mean") -> Tuple[MappedStokesCase, CouetteExact]:
    """
    Couette flow on an annular sector.

    Both curved walls carry full Dirichlet data from the exact field; the
    straight radial edges carry a zero pressure-gradient Neumann condition.

    Args:
        r_in: Inner radius
        r_out: Outer radius
        U: Inner wall tangential speed
        kprime: Pressure degree
        num_elements: Elements per direction
        sweep: Angle of the sector
        nu: Kinematic viscosity
        penalty_constant: C_pen override
        gauge: mean or pin

    Returns:
        (MappedStokesCase, CouetteExact)
    """
    exact = CouetteExact(r_in, r_out, U)
    geometry = polar_map(r_in, r_out, sweep)
    spaces = build_complex_2d(kprime, uniform_breakpoints(num_elements), uniform_breakpoints(num_elements))
    edges = {
        (0, 0): "pressure_neumann",
        (0, 1): "pressure_neumann",
        (1, 0): "dirichlet",
        (1, 1): "dirichlet",
    }
    case = MappedStokesCase(
        geometry=geometry, nu=nu, spaces=spaces, dirichlet=exact.velocity, edges=edges,
        penalty_constant=penalty_constant, gauge=gauge, name="couette",
    )
    return case, exact


def mapped_lid_velocity(height: float):
    """Unit tangential lid speed on y = height for 0 < x < 1, zero on every other wall."""
    def lid(points):
        points = _as_points(points)
        on_lid = (np.isclose(points[:, 1], height, rtol=0.0, atol=1e-12)
                  & (points[:, 0] > 0.0) & (points[:, 0] < 1.0))
        values = np.zeros_like(points)
        values[on_lid, 0] = 1.0
        return values
    return lid


def wavy_cavity_case(a: float, b: float, c: float, kprime: int = 2, num_elements: int = 16,
                     stretched: bool = False, nu: float = 1.0,
                     penalty_constant: Optional[float] = None, gauge: str = "mean") -> MappedStokesCase:
    """
    Lid-driven Stokes flow in a cavity with a wavy bottom wall.

    All edges are Dirichlet; the lid is the parametric edge xi2 = 1, mapped
    to the flat wall y = A.
    """
    geometry = wavy_map(a, b, c)
    points = _breakpoints(num_elements, stretched)
    spaces = build_complex_2d(kprime, points, points)
    return MappedStokesCase(
        geometry=geometry, nu=nu, spaces=spaces, dirichlet=mapped_lid_velocity(geometry.a),
        penalty_constant=penalty_constant, gauge=gauge, name=f"wavy-{geometry.describe()}",
    )
