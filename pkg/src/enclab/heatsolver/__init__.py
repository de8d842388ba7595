"""Forward solvers: finite volumes on box bodies and a radial solver for concentric balls."""

from .cartesian import (
    EllipticSolution,
    TimeDomainSolution,
    boundary_trace,
    solve_heat_timedomain,
    solve_modified_helmholtz,
    solve_scattered_helmholtz,
    solve_scattered_timedomain,
)
from .cg import CGInfo, SolverConfig, SolverError, pcg
from .grid import Grid, MediumField, check_mesh, interior_faces, medium_from_inclusion, stiffness
from .radial import RadialGrid, RadialSolution, radial_gamma, solve_radial

__all__ = [
    "CGInfo",
    "EllipticSolution",
    "Grid",
    "MediumField",
    "RadialGrid",
    "RadialSolution",
    "SolverConfig",
    "SolverError",
    "TimeDomainSolution",
    "boundary_trace",
    "check_mesh",
    "interior_faces",
    "medium_from_inclusion",
    "pcg",
    "radial_gamma",
    "solve_heat_timedomain",
    "solve_modified_helmholtz",
    "solve_radial",
    "solve_scattered_helmholtz",
    "solve_scattered_timedomain",
    "stiffness",
]
