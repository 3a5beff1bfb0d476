"""
Univariate B-spline machinery.

Open knot vectors, Cox-de Boor evaluation with derivatives, Greville
abscissae, tanh-stretched breakpoints and the derivative spaces used to
build the compatible spline complexes.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, OutOfDomainError, UnsupportedDegreeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KnotVector:
    """
    Univariate knot vector of a B-spline basis.

    Attributes:
        degree: Polynomial degree k
        knots: Non-decreasing knot values (length n + k + 1)
    """

    degree: int
    knots: Tuple[float, ...]
    _array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise InvalidInputError(f"degree must be a non-negative integer, got {self.degree}")
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim != 1:
            raise InvalidInputError("knots must be a one-dimensional sequence")
        if not np.all(np.isfinite(knots)):
            raise InvalidInputError("knots must be finite")
        if np.any(np.diff(knots) < 0.0):
            raise InvalidInputError("knots must be non-decreasing")
        n = len(knots) - self.degree - 1
        if n < self.degree + 1:
            raise InvalidInputError(
                f"knot vector of length {len(knots)} too short for degree {self.degree}"
            )
        values, counts = np.unique(knots, return_counts=True)
        if len(values) < 2:
            raise InvalidInputError("knot vector must span a non-empty interval")
        if len(values) > 2 and np.any(counts[1:-1] > max(self.degree, 1)):
            raise InvalidInputError("interior knot multiplicity exceeds the degree")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", tuple(float(v) for v in knots))
        object.__setattr__(self, "_array", knots)

    @property
    def array(self) -> np.ndarray:
        """Read-only numpy view of the knots."""
        return self._array

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return len(self.knots) - self.degree - 1

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self._array)

    @property
    def domain(self) -> Tuple[float, float]:
        return self.knots[0], self.knots[-1]

    @property
    def num_elements(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def is_open(self) -> bool:
        """True when the end knots are repeated exactly degree + 1 times."""
        p = self.degree
        t = self._array
        first = np.count_nonzero(t == t[0])
        last = np.count_nonzero(t == t[-1])
        return first == p + 1 and last == p + 1


@dataclass(frozen=True)
class BasisEval:
    """
    Non-vanishing basis functions at a point.

    Attributes:
        span_index: Index of the knot span containing the point
        values: The k+1 basis values N_{span-k..span}
        first_derivs: First derivatives, or None if not requested
        second_derivs: Second derivatives, or None if not requested
    """

    span_index: int
    values: np.ndarray
    first_derivs: Optional[np.ndarray] = None
    second_derivs: Optional[np.ndarray] = None

    @property
    def first_index(self) -> int:
        """Global index of the first non-vanishing basis function."""
        return self.span_index - (len(self.values) - 1)


def make_open_knot_vector(degree: int, breakpoints: Sequence[float]) -> KnotVector:
    """
    Build an open knot vector with single interior knots.

    Args:
        degree: Polynomial degree
        breakpoints: Strictly increasing breakpoints, at least two

    Returns:
        KnotVector with the end breakpoints repeated degree + 1 times
    """
    points = np.asarray(breakpoints, dtype=float).ravel()
    if len(points) < 2:
        raise InvalidInputError("at least two breakpoints are required")
    if np.any(np.diff(points) <= 0.0):
        raise InvalidInputError("breakpoints must be strictly increasing")
    if int(degree) != degree or degree < 0:
        raise InvalidInputError(f"degree must be a non-negative integer, got {degree}")
    knots = np.concatenate([
        np.full(degree + 1, points[0]),
        points[1:-1],
        np.full(degree + 1, points[-1]),
    ])
    return KnotVector(int(degree), tuple(knots))


def uniform_breakpoints(num_elements: int) -> np.ndarray:
    if num_elements < 1:
        raise InvalidInputError(f"num_elements must be >= 1, got {num_elements}")
    return np.linspace(0.0, 1.0, num_elements + 1)


def stretched_breakpoints(num_elements: int) -> np.ndarray:
    """
    Breakpoints clustered towards both ends of [0, 1].

    Uses xi_i = 0.5 * (1 + tanh(4 i h - 2) / tanh(2)) with h = 1 / num_elements.
    The upper half is mirrored from the lower half so that
    xi_i + xi_{N-i} = 1 holds in floating point.

    Args:
        num_elements: Number of elements, at least 2

    Returns:
        Array of num_elements + 1 strictly increasing breakpoints
    """
    if num_elements < 2:
        raise InvalidInputError(f"num_elements must be >= 2, got {num_elements}")
    h = 1.0 / num_elements
    points = np.empty(num_elements + 1)
    points[0], points[-1] = 0.0, 1.0
    for i in range(1, num_elements // 2 + 1):
        points[i] = 0.5 * (1.0 + np.tanh(4.0 * i * h - 2.0) / np.tanh(2.0))
        points[num_elements - i] = 1.0 - points[i]
    if num_elements % 2 == 0:
        points[num_elements // 2] = 0.5
    return points


def find_span(kv: KnotVector, x: float) -> int:
    """
    Index of the knot span containing x.

    The right end of the domain maps to the last non-empty span.
    """
    t = kv.array
    if not (t[0] <= x <= t[-1]):
        raise OutOfDomainError(f"point {x!r} outside knot range [{t[0]}, {t[-1]}]")
    span = int(np.searchsorted(t, x, side="right")) - 1
    return min(max(span, kv.degree), kv.n - 1)


def _all_ders(t: np.ndarray, p: int, span: int, x: float, nders: int) -> np.ndarray:
    # Cox-de Boor triangle (ndu) followed by the derivative recurrence;
    # 0/0 never occurs on a non-empty span
    ndu = np.empty((p + 1, p + 1))
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - t[span + 1 - j]
        right[j] = t[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((nders + 1, p + 1))
    ders[0, :] = ndu[:, p]
    ne = min(nders, p)
    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, ne + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1

    factor = p
    for k in range(1, ne + 1):
        ders[k, :] *= factor
        factor *= p - k
    return ders


def eval_basis(kv: KnotVector, x: float, max_deriv: int = 0) -> BasisEval:
    """
    Evaluate the non-vanishing basis functions and derivatives at x.

    Args:
        kv: Knot vector
        x: Evaluation point inside the knot range
        max_deriv: Highest derivative order requested (0, 1 or 2)

    Returns:
        BasisEval on the span containing x
    """
    if max_deriv not in (0, 1, 2):
        raise InvalidInputError(f"max_deriv must be 0, 1 or 2, got {max_deriv}")
    x = float(x)
    span = find_span(kv, x)
    ders = _all_ders(kv.array, kv.degree, span, x, max_deriv)
    return BasisEval(
        span_index=span,
        values=ders[0],
        first_derivs=ders[1] if max_deriv >= 1 else None,
        second_derivs=ders[2] if max_deriv >= 2 else None,
    )


def basis_table(kv: KnotVector, xs: Sequence[float], nders: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorised basis evaluation at many points.

    Each distinct coordinate is evaluated once.

    Args:
        kv: Knot vector
        xs: Evaluation points
        nders: Highest derivative order

    Returns:
        (first_index, ders) where first_index[m] is the global index of the
        first active function at xs[m] and ders[m, d, :] holds the d-th
        derivatives of the k+1 active functions
    """
    xs = np.asarray(xs, dtype=float).ravel()
    p = kv.degree
    uniq, inverse = np.unique(xs, return_inverse=True)
    first = np.empty(len(uniq), dtype=np.int64)
    ders = np.empty((len(uniq), nders + 1, p + 1))
    t = kv.array
    for m, x in enumerate(uniq):
        span = find_span(kv, x)
        first[m] = span - p
        ders[m] = _all_ders(t, p, span, x, nders)
    return first[inverse], ders[inverse]


def collocation_matrix(kv: KnotVector, xs: Sequence[float], deriv: int = 0) -> sp.csr_matrix:
    """Sparse matrix B[m, i] = d^deriv N_i(xs[m])."""
    xs = np.asarray(xs, dtype=float).ravel()
    first, ders = basis_table(kv, xs, deriv)
    width = kv.degree + 1
    rows = np.repeat(np.arange(len(xs)), width)
    cols = (first[:, None] + np.arange(width)[None, :]).ravel()
    return sp.csr_matrix((ders[:, deriv, :].ravel(), (rows, cols)), shape=(len(xs), kv.n))


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    """
    Greville abscissae (averages of degree consecutive interior knots).

    Args:
        kv: Knot vector of degree >= 1

    Returns:
        Array of kv.n points clamped to the knot range
    """
    p = kv.degree
    if p == 0:
        raise UnsupportedDegreeError("Greville abscissae are undefined for degree 0")
    t = kv.array
    points = np.array([t[i + 1:i + p + 1].sum() / p for i in range(kv.n)])
    return np.clip(points, t[0], t[-1])


def derivative_knot_vector(kv: KnotVector) -> KnotVector:
    """Open knot vector of degree k-1 on the same breakpoints."""
    if kv.degree == 0:
        raise InvalidInputError("cannot differentiate a degree-0 space")
    if not kv.is_open:
        raise InvalidInputError("derivative space requires an open knot vector")
    return KnotVector(kv.degree - 1, kv.knots[1:-1])


def derivative_matrix(kv: KnotVector) -> sp.csr_matrix:
    """
    Coefficient map of d/dx from kv into derivative_knot_vector(kv).

    Row i holds k / (t[i+k+1] - t[i+1]) * (c[i+1] - c[i]).
    """
    if kv.degree == 0:
        raise InvalidInputError("cannot differentiate a degree-0 space")
    p = kv.degree
    t = kv.array
    n = kv.n
    scale = p / (t[p + 1:p + n] - t[1:n])
    rows = np.repeat(np.arange(n - 1), 2)
    cols = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1).ravel()
    vals = np.stack([-scale, scale], axis=1).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(n - 1, n))


def basis_integrals(kv: KnotVector) -> np.ndarray:
    """Exact integrals of every basis function: (t[i+k+1] - t[i]) / (k+1)."""
    p = kv.degree
    t = kv.array
    return (t[p + 1:] - t[:-(p + 1)]) / (p + 1)


def span_quadrature(breakpoints: Sequence[float], order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre rule with `order` points on every element.

    Returns:
        (points, weights) concatenated element by element
    """
    if order < 1:
        raise InvalidInputError(f"quadrature order must be >= 1, got {order}")
    nodes, weights = np.polynomial.legendre.leggauss(order)
    points = np.asarray(breakpoints, dtype=float)
    a = points[:-1, None]
    b = points[1:, None]
    half = 0.5 * (b - a)
    xs = (a + b) * 0.5 + half * nodes[None, :]
    ws = half * weights[None, :]
    return xs.ravel(), ws.ravel()
