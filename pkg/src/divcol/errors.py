"""
Exception hierarchy for the divcol solver library.
"""


class DivcolError(Exception):
    """Base class for every error raised by divcol."""


class InvalidInputError(DivcolError, ValueError):
    """Arguments that violate an operation's preconditions."""


class OutOfDomainError(InvalidInputError):
    """Evaluation point outside the knot range or parametric box."""


class UnsupportedDegreeError(InvalidInputError):
    """Polynomial degree not supported by the requested operation."""


class ConfigError(InvalidInputError):
    """Invalid run configuration (unknown key, bad type, inconsistent case)."""


class ReferenceDataError(InvalidInputError):
    """Missing or malformed reference data file."""


class AssemblyError(DivcolError, RuntimeError):
    """Failure while building the DOF map or the collocated system."""


class InvalidGeometryError(AssemblyError):
    """Geometry map with non-positive or singular Jacobian determinant."""


class SingularSystemError(DivcolError, RuntimeError):
    """Sparse factorization hit a numerically zero pivot."""


class SolverError(DivcolError, RuntimeError):
    """Base class for nonlinear iteration failures."""


class NewtonDivergedError(SolverError):
    """Residual grew beyond the divergence threshold or became non-finite."""

    def __init__(self, message: str, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class NewtonMaxItersError(SolverError):
    """Iteration cap reached before the tolerances were met."""

    def __init__(self, message: str, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class ContinuationError(SolverError):
    """A Reynolds continuation stage failed."""

    def __init__(self, message: str, stage: int, reynolds: float):
        super().__init__(message)
        self.stage = stage
        self.reynolds = reynolds
