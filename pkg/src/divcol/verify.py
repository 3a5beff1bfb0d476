"""
Verification utilities: error norms, convergence rates, centerline
profiles, velocity extrema, streamfunctions and reference data.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from .colloc2d import divergence_max
from .dofs import VELOCITY_NAMES, DiscreteSolution
from .errors import InvalidInputError, ReferenceDataError
from .manufactured import ManufacturedCase, filament_3d, vortex_2d
from .spaces import TensorSpace, evaluate
from .splines import span_quadrature

logger = logging.getLogger(__name__)

__all__ = [
    "ManufacturedCase", "vortex_2d", "filament_3d", "divergence_max",
    "ErrorReport", "error_norms", "scalar_error_norms", "RateResult", "convergence_rates",
    "centerline_profiles", "VelocityExtrema", "velocity_extrema", "streamfunction",
    "field_samples", "load_reference_profiles", "write_reference_profiles",
    "bundled_reference_path", "profile_deviation", "flagged_rows",
]

FIELDS = ("velocity", "pressure", "vorticity")
REFERENCE_COLUMNS = ["coord", "value", "re", "component", "source"]
DATA_DIR = Path(__file__).resolve().parent / "data"
MISPRINT_FLAG = "-misprint"


@dataclass(frozen=True)
class ErrorReport:
    """
    L2 and H1-seminorm errors of one discrete solution.

    Attributes:
        h: Largest element size
        kprime: Pressure degree
        formulation: vp or vvp
        l2: Field -> L2 error
        h1: Field -> H1 seminorm error
        case: Case label
    """

    h: float
    kprime: int
    formulation: str
    l2: Dict[str, float]
    h1: Dict[str, float]
    case: str = ""

    def __post_init__(self):
        for norm in (self.l2, self.h1):
            for name, value in norm.items():
                if not value >= 0.0:
                    raise InvalidInputError(f"error of {name} must be non-negative, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)


def _mesh_size(solution: DiscreteSolution) -> float:
    return float(max(np.max(np.diff(b)) for b in solution.spaces.breakpoints))


def _quadrature_chunks(breakpoints: Sequence[np.ndarray], order: int):
    """Tensor Gauss points, yielded one slab of the last axis at a time."""
    rules = [span_quadrature(b, order) for b in breakpoints]
    if len(rules) == 2:
        (x, wx), (y, wy) = rules
        X, Y = np.meshgrid(x, y, indexing="xy")
        yield np.stack([X.ravel(), Y.ravel()], axis=1), np.outer(wy, wx).ravel()
        return
    (x, wx), (y, wy), (z, wz) = rules
    X, Y = np.meshgrid(x, y, indexing="xy")
    plane = np.stack([X.ravel(), Y.ravel()], axis=1)
    plane_weights = np.outer(wy, wx).ravel()
    for zk, wk in zip(z, wz):
        yield np.column_stack([plane, np.full(len(plane), zk)]), plane_weights * wk


def _sq(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    if values.ndim == 1:
        return values ** 2
    return np.sum(values.reshape(len(values), -1) ** 2, axis=1)


def _discrete_fields(solution, points, geometry):
    if geometry is not None:
        return {
            "velocity": (solution.physical_velocity(points), solution.physical_velocity_gradient(points)),
            "pressure": (solution.physical_pressure(points), solution.physical_pressure_gradient(points)),
            "vorticity": (solution.physical_vorticity(points), solution.physical_vorticity_gradient(points)),
        }
    return {
        "velocity": (solution.velocity(points), solution.velocity_gradient(points)),
        "pressure": (solution.pressure(points), solution.pressure_gradient(points)),
        "vorticity": (solution.vorticity(points), solution.vorticity_gradient(points)),
    }


def _exact_fields(exact, points):
    return {
        "velocity": (exact.velocity(points), exact.velocity_gradient(points)),
        "pressure": (exact.pressure(points), exact.pressure_gradient(points)),
        "vorticity": (exact.vorticity(points), exact.vorticity_gradient(points)),
    }


def error_norms(solution: DiscreteSolution, exact, geometry=None, order: Optional[int] = None,
                case: str = "") -> ErrorReport:
    """
    Velocity, pressure and vorticity errors in L2 and the H1 seminorm.

    Gauss-Legendre quadrature with k' + 3 points per direction per span.
    Pressures are compared modulo their means. On mapped domains the
    discrete fields are pushed forward and the weights carry |J|.

    Args:
        solution: Discrete solution
        exact: Object with velocity/pressure/vorticity callbacks and their gradients
        geometry: Map of a mapped solution (taken from the solution when omitted)
        order: Quadrature points per span
        case: Label stored in the report

    Returns:
        ErrorReport
    """
    order = solution.kprime + 3 if order is None else order
    if int(order) != order or order < 1:
        raise InvalidInputError(f"quadrature order must be >= 1, got {order}")
    if geometry is None:
        geometry = getattr(solution, "geometry", None)

    l2 = {name: 0.0 for name in FIELDS}
    h1 = {name: 0.0 for name in FIELDS}
    pressure_diff: List[np.ndarray] = []
    pressure_weights: List[np.ndarray] = []
    for points, weights in _quadrature_chunks(solution.spaces.breakpoints, int(order)):
        physical = points
        if geometry is not None:
            metrics = geometry.metrics(points)
            weights = weights * np.abs(metrics.J)
            physical = metrics.x
        discrete = _discrete_fields(solution, points, geometry)
        reference = _exact_fields(exact, physical)
        for name in FIELDS:
            value, grad = discrete[name]
            value_e, grad_e = reference[name]
            h1[name] += float(weights @ _sq(grad - grad_e))
            if name == "pressure":
                pressure_diff.append(value - value_e)
                pressure_weights.append(weights)
            else:
                l2[name] += float(weights @ _sq(value - value_e))

    diff = np.concatenate(pressure_diff)
    w = np.concatenate(pressure_weights)
    diff = diff - (w @ diff) / np.sum(w)
    l2["pressure"] = float(w @ diff ** 2)

    report = ErrorReport(
        h=_mesh_size(solution),
        kprime=solution.kprime,
        formulation=solution.formulation,
        l2={k: math.sqrt(max(v, 0.0)) for k, v in l2.items()},
        h1={k: math.sqrt(max(v, 0.0)) for k, v in h1.items()},
        case=case,
    )
    logger.debug("Errors h=%.4g: L2 %s", report.h, report.l2)
    return report


def scalar_error_norms(space: TensorSpace, coeffs, exact, exact_gradient=None,
                       order: int = 4) -> Tuple[float, Optional[float]]:
    """
    L2 (and optionally H1 seminorm) error of one scalar spline field.

    Args:
        space: Spline space
        coeffs: Coefficients of the discrete field
        exact: Callback points -> values
        exact_gradient: Callback points -> (N, d) gradients, or None
        order: Gauss points per span

    Returns:
        (l2, h1 or None)
    """
    if int(order) != order or order < 1:
        raise InvalidInputError(f"quadrature order must be >= 1, got {order}")
    breakpoints = [kv.breakpoints for kv in space.knot_vectors]
    if space.ndim == 1:
        x, w = span_quadrature(breakpoints[0], order)
        chunks = [(x[:, None], w)]
    else:
        chunks = _quadrature_chunks(breakpoints, order)
    l2 = 0.0
    h1 = 0.0
    for points, weights in chunks:
        l2 += float(weights @ (evaluate(space, coeffs, points) - exact(points)) ** 2)
        if exact_gradient is not None:
            grad = np.stack([
                evaluate(space, coeffs, points, tuple(int(a == b) for b in range(space.ndim)))
                for a in range(space.ndim)
            ], axis=1)
            h1 += float(weights @ _sq(grad - exact_gradient(points)))
    return math.sqrt(l2), (math.sqrt(h1) if exact_gradient is not None else None)


@dataclass(frozen=True)
class RateResult:
    """
    Observed convergence rates of one error quantity.

    Attributes:
        errors: Error per mesh
        rates: log(e_i / e_{i+1}) / log(h_i / h_{i+1}); None where undefined
        last: Rate over the finest interval
        undefined: Some interval had a zero error
    """

    errors: List[float]
    rates: List[Optional[float]] = field(default_factory=list)
    last: Optional[float] = None
    undefined: bool = False


def convergence_rates(reports: Sequence[ErrorReport]) -> Dict[str, RateResult]:
    """
    Rates between consecutive meshes for every field and norm.

    Args:
        reports: Error reports on successively refined meshes

    Returns:
        {"velocity_l2": RateResult, "velocity_h1": ..., ...}
    """
    if len(reports) < 2:
        raise InvalidInputError("convergence rates need at least two error reports")
    hs = [r.h for r in reports]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise InvalidInputError(f"mesh sizes must decrease, got {hs}")

    results = {}
    for name in FIELDS:
        for norm in ("l2", "h1"):
            errors = [getattr(r, norm)[name] for r in reports]
            rates: List[Optional[float]] = []
            for (e0, e1), (h0, h1_) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
                if e0 > 0.0 and e1 > 0.0:
                    rates.append(math.log(e0 / e1) / math.log(h0 / h1_))
                else:
                    rates.append(None)
            undefined = any(r is None for r in rates)
            if undefined:
                logger.info("Rate of %s %s undefined: zero error on some mesh", name, norm)
            results[f"{name}_{norm}"] = RateResult(errors, rates, rates[-1], undefined)
    return results


def _centerline_points(ndim: int, axis: int, coords: np.ndarray) -> np.ndarray:
    points = np.full((len(coords), ndim), 0.5)
    points[:, axis] = coords
    return points


_PROFILES = {
    # component: (velocity index, direction the line runs along)
    "ux_vertical": (0, 1),
    "uy_horizontal": (1, 0),
}


def centerline_profiles(solution: DiscreteSolution, axis: Optional[int] = None,
                        n_samples: int = 129) -> pd.DataFrame:
    """
    Velocity along the cavity centerlines.

    u_x is sampled along the vertical centerline (axis=1) and u_y along the
    horizontal centerline (axis=0); other coordinates sit at 0.5.

    Args:
        solution: 2D or 3D solution on the unit square / cube
        axis: Direction of the line; None returns both profiles
        n_samples: Samples per profile

    Returns:
        DataFrame with columns coord, value, component
    """
    if n_samples < 2:
        raise InvalidInputError(f"n_samples must be >= 2, got {n_samples}")
    coords = np.linspace(0.0, 1.0, n_samples)
    frames = []
    for component, (index, direction) in _PROFILES.items():
        if axis is not None and direction != axis:
            continue
        points = _centerline_points(solution.ndim, direction, coords)
        values = solution.field(VELOCITY_NAMES[index], points)
        frames.append(pd.DataFrame({"coord": coords, "value": values, "component": component}))
    if not frames:
        raise InvalidInputError(f"no centerline profile runs along axis {axis}")
    return pd.concat(frames, ignore_index=True)


@dataclass(frozen=True)
class VelocityExtrema:
    ux_min: float
    y_ux_min: float
    uy_max: float
    x_uy_max: float
    uy_min: float
    x_uy_min: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return self.ux_min, self.uy_max, self.uy_min


def _refine_minimum(f, coords: np.ndarray, values: np.ndarray, tol: float) -> Tuple[float, float]:
    i = int(np.argmin(values))
    if 0 < i < len(coords) - 1 and values[i] < values[i - 1] and values[i] < values[i + 1]:
        try:
            result = minimize_scalar(f, bracket=(coords[i - 1], coords[i], coords[i + 1]),
                                     method="golden", tol=tol)
            if 0.0 <= result.x <= 1.0 and result.fun <= values[i]:
                return float(result.x), float(result.fun)
        except ValueError:
            logger.debug("Golden-section bracket rejected at %.6f", coords[i])
    return float(coords[i]), float(values[i])


def velocity_extrema(solution: DiscreteSolution, n_samples: int = 4096,
                     tol: float = 1e-10) -> VelocityExtrema:
    """
    Minimum of u_x on the vertical centerline and extrema of u_y on the
    horizontal centerline of a 2D cavity.

    Dense sampling locates each extremum; golden-section search on the
    spline profile refines it.
    """
    if solution.ndim != 2:
        raise InvalidInputError("velocity extrema are defined for 2D cavities")
    coords = np.linspace(0.0, 1.0, n_samples)

    def line(component, direction, sign):
        def f(t):
            point = _centerline_points(2, direction, np.array([min(max(float(t), 0.0), 1.0)]))
            return sign * float(solution.field(component, point)[0])
        values = sign * solution.field(component, _centerline_points(2, direction, coords))
        where, value = _refine_minimum(f, coords, values, tol)
        return where, sign * value

    y_min, ux_min = line("ux", 1, 1.0)
    x_max, uy_max = line("uy", 0, -1.0)
    x_min, uy_min = line("uy", 0, 1.0)
    return VelocityExtrema(ux_min, y_min, uy_max, x_max, uy_min, x_min)


def _line_integral(solution: DiscreteSolution, name: str, points: np.ndarray, axis: int,
                   upper: np.ndarray) -> np.ndarray:
    """Integral of a field from 0 to `upper` along `axis`, per-span Gauss rule."""
    breakpoints = solution.spaces.breakpoints[axis]
    nodes, weights = np.polynomial.legendre.leggauss(solution.kprime + 2)
    lo = np.minimum(breakpoints[None, :-1], upper[:, None])
    hi = np.minimum(breakpoints[None, 1:], upper[:, None])
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t = mid[:, :, None] + half[:, :, None] * nodes[None, None, :]
    n, spans, q = t.shape
    samples = np.repeat(points, spans * q, axis=0)
    samples[:, axis] = t.ravel()
    values = solution.field(name, samples).reshape(n, spans, q)
    return np.sum(values * half[:, :, None] * weights[None, None, :], axis=(1, 2))


def streamfunction(solution: DiscreteSolution, points, path: str = "y") -> np.ndarray:
    """
    Streamfunction with u = (d psi/dy, -d psi/dx) and psi(x, 0) = 0.

    The y path integrates u_x from the bottom edge; the x path integrates
    u_x up the left edge and then -u_y across. Mapped solutions are handled
    in the parametric domain, which gives the physical streamfunction at F(xi).

    Args:
        solution: 2D solution
        points: (N, 2) parametric points
        path: y or x

    Returns:
        (N,) samples
    """
    if solution.ndim != 2:
        raise InvalidInputError("the streamfunction is defined for 2D solutions")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if path == "y":
        return _line_integral(solution, "ux", points, 1, points[:, 1])
    if path == "x":
        left = points.copy()
        left[:, 0] = 0.0
        return (_line_integral(solution, "ux", left, 1, points[:, 1])
                - _line_integral(solution, "uy", points, 0, points[:, 0]))
    raise InvalidInputError(f"unknown integration path {path!r}")


def field_samples(solution: DiscreteSolution, n_samples: int = 65) -> pd.DataFrame:
    """
    Uniform-grid samples of velocity, pressure, vorticity and (2D) the
    streamfunction. Mapped solutions report physical values at F(xi).
    """
    if n_samples < 2:
        raise InvalidInputError(f"n_samples must be >= 2, got {n_samples}")
    s = np.linspace(0.0, 1.0, n_samples)
    grids = np.meshgrid(*([s] * solution.ndim), indexing="xy")
    points = np.stack([g.ravel() for g in grids], axis=1)
    geometry = getattr(solution, "geometry", None)
    names = ("x", "y", "z")[:solution.ndim]
    columns: Dict[str, np.ndarray] = {}
    if geometry is not None:
        physical = solution.physical_points(points)
        velocity = solution.physical_velocity(points)
        pressure = solution.physical_pressure(points)
        vorticity = solution.physical_vorticity(points)
    else:
        physical = points
        velocity = solution.velocity(points)
        pressure = solution.pressure(points)
        vorticity = solution.vorticity(points)
    for a, name in enumerate(names):
        columns[name] = physical[:, a]
    for a in range(solution.ndim):
        columns[VELOCITY_NAMES[a]] = velocity[:, a]
    columns["p"] = pressure
    if solution.ndim == 2:
        columns["omega"] = vorticity
        columns["psi"] = streamfunction(solution, points)
    else:
        for a, name in enumerate(names):
            columns[f"omega_{name}"] = vorticity[:, a]
    return pd.DataFrame(columns)


def bundled_reference_path(re: float) -> Path:
    """Path of the bundled centerline data for a Reynolds number."""
    path = DATA_DIR / f"ghia_re{int(round(re))}.csv"
    if not path.exists():
        raise ReferenceDataError(f"no bundled reference profiles for Re = {re:g}")
    return path


def load_reference_profiles(path: Union[str, Path]) -> pd.DataFrame:
    """
    Read a reference profile CSV.

    Lines starting with '#' hold provenance. The header must be
    coord,value,re,component,source and coordinates must increase
    within each component.

    Args:
        path: CSV file

    Returns:
        DataFrame with the reference columns

    Raises:
        ReferenceDataError: Missing file, bad header or malformed row
    """
    path = Path(path)
    if not path.is_file():
        raise ReferenceDataError(f"reference file not found: {path}")
    try:
        table = pd.read_csv(path, comment="#", skipinitialspace=True, index_col=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise ReferenceDataError(f"{path}: {e}") from e
    table.columns = [str(c).strip() for c in table.columns]
    if list(table.columns) != REFERENCE_COLUMNS:
        raise ReferenceDataError(
            f"{path}: expected header {','.join(REFERENCE_COLUMNS)}, got {','.join(table.columns)}"
        )
    if table.empty:
        raise ReferenceDataError(f"{path}: no reference data")

    numeric = table[["coord", "value", "re"]].apply(pd.to_numeric, errors="coerce").astype(float)
    bad = ~np.isfinite(numeric.to_numpy()).all(axis=1) | table["component"].isna()
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise ReferenceDataError(f"{path}: malformed row {table.iloc[first].tolist()}")
    table[["coord", "value", "re"]] = numeric
    table["component"] = table["component"].astype(str).str.strip()
    table["source"] = table["source"].fillna("").astype(str).str.strip()

    for component, coords in table.groupby("component", sort=False)["coord"]:
        if not coords.is_monotonic_increasing or coords.duplicated().any():
            raise ReferenceDataError(f"{path}: coordinates of {component} are not increasing")
    return table


def write_reference_profiles(table: pd.DataFrame, path: Union[str, Path],
                             provenance: Iterable[str] = ()) -> Path:
    """Write a reference table with '#' provenance lines ahead of the header."""
    missing = [c for c in REFERENCE_COLUMNS if c not in table.columns]
    if missing:
        raise ReferenceDataError(f"reference table lacks columns {missing}")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        for line in provenance:
            handle.write(f"# {line}\n")
        table[REFERENCE_COLUMNS].to_csv(handle, index=False, lineterminator="\n")
    return path


def flagged_rows(reference: pd.DataFrame) -> pd.Series:
    """Rows whose source carries the misprint flag."""
    return reference["source"].astype(str).str.endswith(MISPRINT_FLAG)


def profile_deviation(solution: DiscreteSolution, reference: pd.DataFrame,
                      include_flagged: bool = False) -> Dict[str, float]:
    """
    RMS and max deviation of the solution's centerline velocity from a
    reference table.

    Rows flagged as misprints in the source table are left out unless
    include_flagged is set.

    Returns:
        {"<component>_rms": ..., "<component>_max": ...}
    """
    if not include_flagged and "source" in reference.columns:
        reference = reference[~flagged_rows(reference)]
    result = {}
    for component, (index, direction) in _PROFILES.items():
        subset = reference[reference["component"] == component]
        if subset.empty:
            continue
        points = _centerline_points(solution.ndim, direction, subset["coord"].to_numpy(dtype=float))
        diff = solution.field(VELOCITY_NAMES[index], points) - subset["value"].to_numpy(dtype=float)
        result[f"{component}_rms"] = float(np.sqrt(np.mean(diff ** 2)))
        result[f"{component}_max"] = float(np.max(np.abs(diff)))
    return result
