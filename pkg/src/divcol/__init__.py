"""Divergence-conforming B-spline collocation for steady incompressible flow."""

from .colloc2d import CaseDefinition2D, CollocationSystem2D, assemble_vp, assemble_vvp, divergence_max
from .colloc3d import CaseDefinition3D, CollocationSystem3D, assemble_vp_3d, assemble_vvp_3d
from .errors import (
    AssemblyError,
    ConfigError,
    ContinuationError,
    DivcolError,
    InvalidGeometryError,
    InvalidInputError,
    NewtonDivergedError,
    NewtonMaxItersError,
    SingularSystemError,
    SolverError,
)
from .mapped import (
    MappedStokesCase,
    assemble_mapped_vvp_stokes,
    couette_case,
    identity_map,
    polar_map,
    pullback_fields,
    pushforward_fields,
    wavy_cavity_case,
    wavy_map,
)
from .solver import NewtonSettings, SolveReport, continuation_solve, newton_solve, solve_linear
from .spaces import build_complex_2d, build_complex_3d, evaluate
from .verify import (
    centerline_profiles,
    convergence_rates,
    error_norms,
    filament_3d,
    load_reference_profiles,
    streamfunction,
    velocity_extrema,
    vortex_2d,
)
