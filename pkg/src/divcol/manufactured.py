"""
Exact fields for manufactured-solution studies.

Fields are finite sums of products of univariate factors (polynomials,
exponential-polynomials and sinusoids). Every partial derivative is again
such a sum, so all derivatives are closed-form.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial

from .errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExpPoly:
    """e^x q(x) for a polynomial q."""

    poly: Polynomial

    def __call__(self, x):
        return np.exp(x) * self.poly(x)

    def deriv(self, m: int = 1) -> "ExpPoly":
        q = self.poly
        for _ in range(m):
            q = q + q.deriv()
        return ExpPoly(q)


@dataclass(frozen=True)
class Sinusoid:
    """a sin(k x) + b cos(k x)."""

    a: float
    b: float
    k: float

    def __call__(self, x):
        return self.a * np.sin(self.k * x) + self.b * np.cos(self.k * x)

    def deriv(self, m: int = 1) -> "Sinusoid":
        f = self
        for _ in range(m):
            f = Sinusoid(-f.b * f.k, f.a * f.k, f.k)
        return f


Factor = Union[Polynomial, ExpPoly, Sinusoid]

_X = Polynomial([0.0, 1.0])
_ONE = Polynomial([1.0])


def _deriv(factor: Factor, m: int) -> Factor:
    if m == 0:
        return factor
    return factor.deriv(m)


class SeparableField:
    """
    Sum of terms c * f_1(x) * f_2(y) [* f_3(z)].

    Args:
        terms: Sequence of (coefficient, factors) pairs
    """

    def __init__(self, terms: Sequence[Tuple[float, Tuple[Factor, ...]]]):
        self.terms = tuple((float(c), tuple(factors)) for c, factors in terms)
        dims = {len(f) for _, f in self.terms}
        if len(dims) > 1:
            raise InvalidInputError("all terms must have the same number of factors")
        self.ndim = dims.pop() if dims else 0

    @classmethod
    def constant(cls, value: float, ndim: int) -> "SeparableField":
        return cls([(value, (_ONE,) * ndim)])

    def __call__(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.zeros(len(points))
        for c, factors in self.terms:
            value = np.full(len(points), c)
            for axis, f in enumerate(factors):
                value = value * f(points[:, axis])
            total += value
        return total

    def partial(self, *axes: int) -> "SeparableField":
        """Partial derivative, one axis entry per differentiation."""
        counts = [0] * self.ndim
        for axis in axes:
            counts[axis] += 1
        return SeparableField([
            (c, tuple(_deriv(f, counts[a]) for a, f in enumerate(factors)))
            for c, factors in self.terms
        ])

    def gradient(self, points) -> np.ndarray:
        return np.stack([self.partial(a)(points) for a in range(self.ndim)], axis=1)

    def __add__(self, other: "SeparableField") -> "SeparableField":
        return SeparableField(self.terms + other.terms)

    def __neg__(self) -> "SeparableField":
        return SeparableField([(-c, f) for c, f in self.terms])

    def __sub__(self, other: "SeparableField") -> "SeparableField":
        return self + (-other)

    def __mul__(self, scalar: float) -> "SeparableField":
        return SeparableField([(scalar * c, f) for c, f in self.terms])

    __rmul__ = __mul__


def curl(field: Sequence[SeparableField]) -> Tuple[SeparableField, ...]:
    """Curl of a 3D vector of separable fields."""
    fx, fy, fz = field
    return (
        fz.partial(1) - fy.partial(2),
        fx.partial(2) - fz.partial(0),
        fy.partial(0) - fx.partial(1),
    )


@dataclass(frozen=True)
class ManufacturedCase:
    """
    Exact solution of a manufactured Navier-Stokes problem.

    Attributes:
        name: Case label
        nu: Kinematic viscosity
        velocity_fields: Exact velocity components
        pressure_field: Exact kinematic pressure before scaling
        sigma: Pressure scale factor
    """

    name: str
    nu: float
    velocity_fields: Tuple[SeparableField, ...]
    pressure_field: SeparableField
    sigma: float = 1.0

    def __post_init__(self):
        if not self.nu > 0.0:
            raise InvalidInputError(f"nu must be positive, got {self.nu}")

    @property
    def ndim(self) -> int:
        return len(self.velocity_fields)

    @property
    def vorticity_fields(self) -> Tuple[SeparableField, ...]:
        u = self.velocity_fields
        if self.ndim == 2:
            return (u[1].partial(0) - u[0].partial(1),)
        return curl(u)

    def velocity(self, points) -> np.ndarray:
        return np.stack([u(points) for u in self.velocity_fields], axis=1)

    def velocity_gradient(self, points) -> np.ndarray:
        """[N, i, j] = d u_i / d x_j."""
        return np.stack([u.gradient(points) for u in self.velocity_fields], axis=1)

    def velocity_laplacian(self, points) -> np.ndarray:
        d = self.ndim
        return np.stack([
            sum(u.partial(a, a)(points) for a in range(d)) for u in self.velocity_fields
        ], axis=1)

    def divergence(self, points) -> np.ndarray:
        return sum(u.partial(a)(points) for a, u in enumerate(self.velocity_fields))

    def pressure(self, points) -> np.ndarray:
        return self.sigma * self.pressure_field(points)

    def pressure_gradient(self, points) -> np.ndarray:
        return self.sigma * self.pressure_field.gradient(points)

    def total_pressure(self, points) -> np.ndarray:
        u = self.velocity(points)
        return self.pressure(points) + 0.5 * np.sum(u * u, axis=1)

    def total_pressure_gradient(self, points) -> np.ndarray:
        u = self.velocity(points)
        return self.pressure_gradient(points) + np.einsum("nij,ni->nj", self.velocity_gradient(points), u)

    def vorticity(self, points) -> np.ndarray:
        """Scalar in 2D, (N, 3) in 3D."""
        values = [w(points) for w in self.vorticity_fields]
        return values[0] if self.ndim == 2 else np.stack(values, axis=1)

    def vorticity_gradient(self, points) -> np.ndarray:
        grads = [w.gradient(points) for w in self.vorticity_fields]
        return grads[0] if self.ndim == 2 else np.stack(grads, axis=1)

    def dirichlet(self, points) -> np.ndarray:
        return self.velocity(points)

    def forcing_vp(self, points) -> np.ndarray:
        """-nu lap u + (u . grad) u + grad p."""
        u = self.velocity(points)
        convection = np.einsum("nij,nj->ni", self.velocity_gradient(points), u)
        return -self.nu * self.velocity_laplacian(points) + convection + self.pressure_gradient(points)

    def forcing_vvp(self, points) -> np.ndarray:
        """nu curl w + w x u + grad P."""
        u = self.velocity(points)
        w = self.vorticity(points)
        dw = self.vorticity_gradient(points)
        if self.ndim == 2:
            viscous = np.stack([dw[:, 1], -dw[:, 0]], axis=1)
            rotation = np.stack([-w * u[:, 1], w * u[:, 0]], axis=1)
        else:
            viscous = np.stack([
                dw[:, 2, 1] - dw[:, 1, 2],
                dw[:, 0, 2] - dw[:, 2, 0],
                dw[:, 1, 0] - dw[:, 0, 1],
            ], axis=1)
            rotation = np.cross(w, u)
        return self.nu * viscous + rotation + self.total_pressure_gradient(points)

    def forcing(self, formulation: str, stokes_only: bool = False) -> Callable[[np.ndarray], np.ndarray]:
        """Forcing callback matching a formulation's pressure convention."""
        if stokes_only:
            return lambda points: (-self.nu * self.velocity_laplacian(points)
                                   + self.pressure_gradient(points))
        if formulation == "vp":
            return self.forcing_vp
        if formulation == "vvp":
            return self.forcing_vvp
        raise InvalidInputError(f"unknown formulation {formulation!r}")

    def forcing_mismatch(self, points) -> float:
        """Largest difference between the two forcing conventions."""
        return float(np.max(np.abs(self.forcing_vp(points) - self.forcing_vvp(points))))


def vortex_2d(nu: float = 1.0, sigma: float = 1.0) -> ManufacturedCase:
    """
    Manufactured vortex on the unit square.

    u = (2 e^x (x-1)^2 x^2 (y^2-y)(2y-1), -e^x (x-1) x (x^2+3x-2) (y-1)^2 y^2)
    and an exponential-polynomial pressure scaled by sigma.

    Args:
        nu: Kinematic viscosity
        sigma: Pressure scale

    Returns:
        ManufacturedCase
    """
    x = y = _X
    s = y * y - y
    ux = SeparableField([(2.0, (ExpPoly((x - 1) ** 2 * x ** 2), s * (2 * y - 1)))])
    uy = SeparableField([(-1.0, (ExpPoly((x - 1) * x * (x ** 2 + 3 * x - 2)), (y - 1) ** 2 * y ** 2))])
    a_poly = 12 * x ** 4 - 72 * x ** 3 + 228 * x ** 2 - 456 * x + 456
    b_poly = x ** 4 + 2 * x ** 3 - 5 * x ** 2 + 2 * x
    pressure = SeparableField([
        (-424.0 + 156.0 * np.e, (_ONE, _ONE)),
        (-456.0, (_ONE, s)),
        (1.0, (ExpPoly(a_poly), s)),
        (1.0, (ExpPoly(b_poly), s * s)),
    ])
    return ManufacturedCase("vortex2d", nu, (ux, uy), pressure, sigma)


def filament_3d(nu: float = 1.0, sigma: float = 1.0) -> ManufacturedCase:
    """
    Flow around a single vortex filament in the unit cube.

    u = curl phi with phi = (x(x-1) y^2(y-1)^2 z^2(z-1)^2, 0,
    x^2(x-1)^2 y^2(y-1)^2 z(z-1)) and p = sin(pi x) sin(pi y) - 4/pi^2.
    """
    x = _X
    bubble = x * (x - 1)
    bubble2 = bubble ** 2
    phi_x = SeparableField([(1.0, (bubble, bubble2, bubble2))])
    phi_y = SeparableField([(0.0, (_ONE, _ONE, _ONE))])
    phi_z = SeparableField([(1.0, (bubble2, bubble2, bubble))])
    velocity = curl((phi_x, phi_y, phi_z))
    sine = Sinusoid(1.0, 0.0, np.pi)
    pressure = SeparableField([
        (1.0, (sine, sine, _ONE)),
        (-4.0 / np.pi ** 2, (_ONE, _ONE, _ONE)),
    ])
    return ManufacturedCase("vortex3d", nu, velocity, pressure, sigma)
