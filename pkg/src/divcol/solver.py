"""
Sparse direct solves, Newton-Raphson iteration and Reynolds continuation.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ContinuationError,
    InvalidInputError,
    NewtonDivergedError,
    NewtonMaxItersError,
    SingularSystemError,
    SolverError,
)

logger = logging.getLogger(__name__)

ResidualCallback = Callable[..., Tuple[np.ndarray, Optional[sp.spmatrix]]]

PIVOT_TOLERANCE = 1e-14
BACKWARD_ERROR_TARGET = 1e-10
DIVERGENCE_FACTOR = 1e4
MAX_REFINEMENT_STEPS = 2


@dataclass(frozen=True)
class NewtonSettings:
    """
    Newton-Raphson controls.

    Attributes:
        abs_tol: Stop when the residual infinity-norm falls below this
        rel_tol: Stop when the residual falls below rel_tol times the initial one
        max_iters: Iteration cap
        continuation_ladder: Reynolds numbers to step through (empty = default ladder)
    """

    abs_tol: float = 1e-11
    rel_tol: float = 1e-10
    max_iters: int = 25
    continuation_ladder: Tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.abs_tol > 0.0 and self.rel_tol > 0.0):
            raise InvalidInputError("Newton tolerances must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidInputError(f"max_iters must be a positive integer, got {self.max_iters}")
        object.__setattr__(self, "continuation_ladder", tuple(float(r) for r in self.continuation_ladder))


@dataclass(frozen=True)
class LinearSolveStats:
    """
    Diagnostics of one sparse LU solve.

    Attributes:
        size: Matrix dimension
        nnz: Non-zeros of the matrix
        fill: (nnz(L) + nnz(U)) / nnz(A)
        backward_error: ||Ax - b|| / (||A|| ||x|| + ||b||), infinity norms
        refinement_steps: Iterative refinement steps applied
    """

    size: int
    nnz: int
    fill: float
    backward_error: float
    refinement_steps: int = 0


@dataclass
class SolveReport:
    """
    Outcome of a Newton solve.

    Attributes:
        iterations: Newton steps taken
        residual_history: Residual infinity-norms, initial residual first
        converged: Whether a tolerance was met
        linear_solver_stats: One entry per linear solve
        gauge_multiplier: Solved lambda, once check_gauge has seen the solution
        gauge_ok: Whether |lambda| passed check_gauge
    """

    iterations: int
    residual_history: List[float]
    converged: bool
    linear_solver_stats: List[LinearSolveStats] = field(default_factory=list)
    gauge_multiplier: Optional[float] = None
    gauge_ok: Optional[bool] = None

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    def to_dict(self) -> dict:
        last = self.linear_solver_stats[-1] if self.linear_solver_stats else None
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "residual_history": [float(r) for r in self.residual_history],
            "factorization_fill": None if last is None else round(last.fill, 6),
            "backward_error": None if last is None else float(last.backward_error),
            "gauge_multiplier": self.gauge_multiplier,
            "gauge_ok": self.gauge_ok,
        }


def _backward_error(matrix: sp.spmatrix, x: np.ndarray, rhs: np.ndarray, norm_a: float) -> float:
    residual = np.max(np.abs(matrix @ x - rhs)) if len(rhs) else 0.0
    denominator = norm_a * np.max(np.abs(x), initial=0.0) + np.max(np.abs(rhs), initial=0.0)
    if denominator == 0.0:
        return 0.0
    return float(residual / denominator)


def factorize_and_solve(matrix: sp.spmatrix, rhs: np.ndarray) -> Tuple[np.ndarray, LinearSolveStats]:
    """
    Solve Ax = b with SuperLU (partial pivoting, COLAMD ordering).

    Args:
        matrix: Square sparse matrix
        rhs: Right-hand side

    Returns:
        (x, LinearSolveStats)
    """
    matrix = sp.csc_matrix(matrix)
    rhs = np.asarray(rhs, dtype=float).ravel()
    n, m = matrix.shape
    if n != m:
        raise InvalidInputError(f"matrix must be square, got {matrix.shape}")
    if len(rhs) != n:
        raise InvalidInputError(f"rhs has length {len(rhs)}, matrix has {n} rows")
    if not np.all(np.isfinite(matrix.data)) or not np.all(np.isfinite(rhs)):
        raise SingularSystemError("non-finite entries in the linear system")

    norm_a = float(abs(matrix).sum(axis=1).max()) if matrix.nnz else 0.0
    if norm_a == 0.0:
        raise SingularSystemError("zero matrix")
    try:
        lu = spla.splu(matrix, permc_spec="COLAMD")
    except RuntimeError as e:
        raise SingularSystemError(f"sparse LU failed: {e}") from e

    pivots = np.abs(lu.U.diagonal())
    if pivots.min() < PIVOT_TOLERANCE * norm_a:
        raise SingularSystemError(
            f"pivot {pivots.min():.3e} below {PIVOT_TOLERANCE:.0e} x ||A|| = {norm_a:.3e}"
        )

    x = lu.solve(rhs)
    error = _backward_error(matrix, x, rhs, norm_a)
    steps = 0
    while error > BACKWARD_ERROR_TARGET and steps < MAX_REFINEMENT_STEPS:
        x = x + lu.solve(rhs - matrix @ x)
        error = _backward_error(matrix, x, rhs, norm_a)
        steps += 1
    if error > BACKWARD_ERROR_TARGET:
        logger.warning("Backward error %.3e above %.0e after %d refinement steps",
                       error, BACKWARD_ERROR_TARGET, steps)

    stats = LinearSolveStats(
        size=n,
        nnz=int(matrix.nnz),
        fill=float(lu.L.nnz + lu.U.nnz) / max(matrix.nnz, 1),
        backward_error=error,
        refinement_steps=steps,
    )
    logger.debug("LU n=%d nnz=%d fill=%.2f backward error=%.2e", n, matrix.nnz, stats.fill, error)
    return x, stats


def solve_linear(matrix: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Direct sparse solve; see factorize_and_solve."""
    x, _ = factorize_and_solve(matrix, rhs)
    return x


def _residual_norm(r: np.ndarray) -> float:
    return float(np.max(np.abs(r))) if len(r) else 0.0


def newton_solve(residual_and_jacobian: ResidualCallback, initial: np.ndarray,
                 settings: Optional[NewtonSettings] = None) -> Tuple[np.ndarray, SolveReport]:
    """
    Full-step Newton-Raphson iteration.

    Args:
        residual_and_jacobian: Callback x -> (residual, sparse Jacobian)
        initial: Starting vector
        settings: Tolerances and iteration cap

    Returns:
        (solution vector, SolveReport)
    """
    settings = settings or NewtonSettings()
    x = np.array(initial, dtype=float)
    residual, jacobian = residual_and_jacobian(x)
    residual = np.asarray(residual, dtype=float)
    if jacobian is not None and jacobian.shape != (len(residual), len(x)):
        raise InvalidInputError(
            f"Jacobian shape {jacobian.shape} inconsistent with residual {len(residual)} / unknowns {len(x)}"
        )
    r0 = _residual_norm(residual)
    history = [r0]
    stats: List[LinearSolveStats] = []
    if not np.isfinite(r0):
        raise NewtonDivergedError("initial residual is not finite", history)
    if r0 <= settings.abs_tol:
        return x, SolveReport(0, history, True, stats)

    for iteration in range(1, settings.max_iters + 1):
        step, stat = factorize_and_solve(jacobian, -residual)
        stats.append(stat)
        x = x + step
        residual, jacobian = residual_and_jacobian(x)
        rn = _residual_norm(residual)
        history.append(rn)
        logger.info("Newton %2d: |r| = %.3e (ratio %.2e)", iteration, rn, rn / r0 if r0 else 0.0)
        if not np.isfinite(rn) or rn > DIVERGENCE_FACTOR * r0:
            raise NewtonDivergedError(
                f"Newton diverged at iteration {iteration}: |r| = {rn:.3e} from {r0:.3e}", history
            )
        if rn <= settings.abs_tol or rn <= settings.rel_tol * r0:
            return x, SolveReport(iteration, history, True, stats)

    raise NewtonMaxItersError(
        f"Newton did not converge after {settings.max_iters} iterations (|r| = {history[-1]:.3e})",
        history,
    )


def default_ladder(target_re: float) -> Tuple[float, ...]:
    """{100, 400, target} above Re = 400, otherwise a direct solve."""
    if target_re > 400.0:
        return (100.0, 400.0, float(target_re))
    return (float(target_re),)


def continuation_solve(case_family: Callable[[float], object], ladder: Sequence[float],
                       settings: Optional[NewtonSettings] = None):
    """
    Solve a sequence of Reynolds numbers, each starting from the previous solution.

    Args:
        case_family: Re -> system exposing initial_solution(), to_vector(),
            to_solution() and residual_and_jacobian(); all systems share one DOF layout
        ladder: Strictly increasing Reynolds numbers, the last being the target
        settings: Newton settings

    Returns:
        (final solution, list of SolveReport per stage)
    """
    ladder = [float(r) for r in ladder]
    if not ladder:
        raise InvalidInputError("continuation ladder is empty")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise InvalidInputError(f"continuation ladder must be increasing, got {ladder}")

    x = None
    reports = []
    system = None
    for stage, reynolds in enumerate(ladder):
        system = case_family(reynolds)
        if x is None:
            x = system.to_vector(system.initial_solution())
        elif len(x) != system.dof_map.n_unknowns:
            raise InvalidInputError("continuation stages must share the DOF layout")
        logger.info("Continuation stage %d/%d: Re = %g", stage + 1, len(ladder), reynolds)
        try:
            x, report = newton_solve(system.residual_and_jacobian, x, settings)
        except (SolverError, SingularSystemError) as e:
            raise ContinuationError(
                f"continuation stage {stage + 1}/{len(ladder)} (Re = {reynolds:g}) failed: {e}",
                stage, reynolds,
            ) from e
        reports.append(report)
    return system.to_solution(x), reports


def check_gauge(solution, tolerance: float = 1e-8, report: Optional[SolveReport] = None) -> bool:
    """
    Check that the gauge multiplier is negligible against the coefficients.

    The outcome is logged and, when a report is given, stored on it.
    """
    scale = max(np.max(np.abs(c)) for c in solution.coeffs.values())
    ok = bool(abs(solution.lam) <= tolerance * max(scale, 1.0))
    if report is not None:
        report.gauge_multiplier = float(solution.lam)
        report.gauge_ok = ok
    if not ok:
        logger.warning("Gauge multiplier %.3e exceeds %.0e x ||solution||", solution.lam, tolerance)
    return ok
