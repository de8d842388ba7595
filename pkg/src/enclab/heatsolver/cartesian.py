"""Finite-volume heat and modified-Helmholtz solvers on box bodies.

Total-field solvers take prescribed Neumann data on the boundary faces.  The
scattered-field solvers compute the correction caused by the inclusion,
``eps = w - w0`` (or ``u - v`` in time), driven by the face fluxes
``(gamma_f - 1) d_n w0`` of the analytic incident field.  The correction is of
the size of the indicator itself, so its discretization error is relative to
the signal instead of to the much larger incident field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..geometry import Box, GeometryError, ShellSource, validate_shell
from ..potentials import w00_gradient
from ..shellflux import BoundarySeries, FluxRecord, TimeGrid, shell_heat_gradient
from .cg import CGInfo, SolverConfig, pcg
from .grid import Grid, InteriorFaces, MediumField, check_mesh, face_centres, interior_faces, stiffness


@dataclass
class EllipticSolution:
    field: np.ndarray
    trace: np.ndarray
    info: CGInfo


@dataclass
class TimeDomainSolution:
    boundary: BoundarySeries
    final: np.ndarray
    heat: np.ndarray  # total heat sum(V u) after each step, heat[0] for the initial state
    iterations: list = field(default_factory=list)


def _check_body(body, grid: Grid):
    if not isinstance(body, Box):
        raise GeometryError("3D mode requires a box body; use solve_radial for concentric balls")
    if not (np.allclose(body.lo, grid.box.lo) and np.allclose(body.hi, grid.box.hi)):
        raise GeometryError("grid box must coincide with the body")


def _check_medium(medium: MediumField, grid: Grid):
    if medium.gamma.shape != (grid.n_cells,):
        raise GeometryError(f"medium has {medium.gamma.size} cells, grid has {grid.n_cells}")
    if not np.all(medium.gamma[grid.boundary.cell] == 1.0):
        raise GeometryError("the inclusion must not touch the boundary cells")


def boundary_trace(grid: Grid, values: np.ndarray, dnu: np.ndarray | float = 0.0) -> np.ndarray:
    """Second-order boundary values from the two nearest cells and the normal derivative.

    With d the distance from the face, a quadratic through the cell values at
    d = h/2, 3h/2 with slope -dnu at d = 0 gives (9 u_1 - u_2 + 3 h dnu)/8.
    """
    bf = grid.boundary
    return (9.0 * values[bf.cell] - values[bf.inner] + 3.0 * bf.h * dnu) / 8.0


def _neumann_load(grid: Grid, g) -> np.ndarray:
    bf = grid.boundary
    load = np.zeros(grid.n_cells)
    np.add.at(load, bf.cell, bf.area * g)
    return load


def solve_modified_helmholtz(body, medium: MediumField, tau: float, neumann_data, grid: Grid,
                             config: SolverConfig = SolverConfig(), source=None) -> EllipticSolution:
    """Solve div(gamma grad w) - tau w = source with gamma d_nu w = neumann_data.

    ``neumann_data`` holds one value per boundary face in ``grid.boundary_mesh()``
    order; ``source`` (optional) is a per-cell density.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    _check_body(body, grid)
    _check_medium(medium, grid)
    g = np.asarray(neumann_data, dtype=float)
    if g.shape != grid.boundary.cell.shape:
        raise GeometryError(f"expected {grid.boundary.cell.size} Neumann values, got {g.size}")
    faces = interior_faces(grid, medium.gamma)
    A = stiffness(grid, faces) + sp.identity(grid.n_cells, format="csr") * (tau * grid.cell_volume)
    rhs = _neumann_load(grid, g)
    if source is not None:
        rhs -= grid.cell_volume * np.asarray(source, dtype=float)
    w, info = pcg(A, rhs, A.diagonal(), config=config)
    return EllipticSolution(w, boundary_trace(grid, w, g), info)


def _scattered_faces(faces: InteriorFaces):
    sel = np.flatnonzero(faces.gamma != 1.0)
    # (gamma_f - 1) * area / h times h gives (gamma_f - 1) * area
    return sel


def _scattered_load(grid: Grid, faces: InteriorFaces, sel, points, grad) -> np.ndarray:
    axis = faces.axis[sel]
    dn = grad[np.arange(sel.size), axis]
    weight = (faces.gamma[sel] - 1.0) * np.array([grid.face_area(a) for a in range(3)])[axis]
    load = np.zeros(grid.n_cells)
    np.add.at(load, faces.lo[sel], weight * dn)
    np.add.at(load, faces.hi[sel], -weight * dn)
    return load


def solve_scattered_helmholtz(body, medium: MediumField, tau: float, shell: ShellSource, grid: Grid,
                              config: SolverConfig = SolverConfig()) -> EllipticSolution:
    """Correction eps = w - w0 with w0 the analytic shell profile.

    Solves div(gamma grad eps) - tau eps = -div((gamma - 1) grad w0) with zero
    Neumann data; the boundary trace of eps is returned.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    _check_body(body, grid)
    _check_medium(medium, grid)
    validate_shell(body, shell)
    faces = interior_faces(grid, medium.gamma)
    A = stiffness(grid, faces) + sp.identity(grid.n_cells, format="csr") * (tau * grid.cell_volume)
    sel = _scattered_faces(faces)
    if sel.size == 0:
        zero = np.zeros(grid.n_cells)
        return EllipticSolution(zero, boundary_trace(grid, zero), CGInfo(0, 0.0))
    pts = face_centres(grid, faces, sel)
    rhs = _scattered_load(grid, faces, sel, pts, w00_gradient(pts, shell, np.sqrt(tau)))
    eps, info = pcg(A, rhs, A.diagonal(), config=config)
    return EllipticSolution(eps, boundary_trace(grid, eps), info)


def _step_matrices(L, grid, times):
    """Step sizes and the matrices V/dt + L, one per distinct step.

    Steps equal to 12 significant digits share a matrix; that rounded step is
    then used consistently on both sides of the update.
    """
    dts = np.diff(times)
    if np.any(dts <= 0):
        raise ValueError("time nodes must be strictly increasing")
    dts = np.array([float(f"{dt:.12g}") for dt in dts])
    cache = {}
    for dt in np.unique(dts):
        cache[float(dt)] = L + sp.identity(grid.n_cells, format="csr") * (grid.cell_volume / dt)
    return dts, cache


def solve_heat_timedomain(body, medium: MediumField, flux: FluxRecord, grid: Grid,
                          config: SolverConfig = SolverConfig(), u0=None) -> TimeDomainSolution:
    """Implicit Euler for u_t = div(gamma grad u), gamma d_nu u = f, u(0) = u0 (default 0).

    The flux is taken at the new time level, so the total heat obeys
    sum(V u^{n+1}) - sum(V u^n) = dt sum_faces(area f^{n+1}) up to the solver tolerance.
    """
    _check_body(body, grid)
    _check_medium(medium, grid)
    check_mesh(grid, flux.mesh)
    times = np.asarray(flux.times, dtype=float)
    faces = interior_faces(grid, medium.gamma)
    L = stiffness(grid, faces)
    dts, mats = _step_matrices(L, grid, times)
    u = np.zeros(grid.n_cells) if u0 is None else np.array(u0, dtype=float)
    u_prev = u
    gamma_b = medium.gamma[grid.boundary.cell]
    trace = np.empty((grid.boundary.cell.size, times.size))
    trace[:, 0] = boundary_trace(grid, u, flux.values[:, 0] / gamma_b)
    heat = [grid.cell_volume * float(np.sum(u))]
    iters = []
    for n, dt in enumerate(dts, start=1):
        A = mats[float(dt)]
        rhs = (grid.cell_volume / dt) * u + _neumann_load(grid, flux.values[:, n])
        # linear extrapolation in time as the starting guess
        guess = 2.0 * u - u_prev if n > 1 else u
        u_prev = u
        u, info = pcg(A, rhs, A.diagonal(), x0=guess, config=config)
        trace[:, n] = boundary_trace(grid, u, flux.values[:, n] / gamma_b)
        heat.append(grid.cell_volume * float(np.sum(u)))
        iters.append(info.iterations)
    return TimeDomainSolution(BoundarySeries(flux.mesh, times, trace), u, np.array(heat), iters)


def solve_scattered_timedomain(body, medium: MediumField, shell: ShellSource, grid: Grid,
                               time_grid: TimeGrid, config: SolverConfig = SolverConfig(),
                               block: int = 64) -> TimeDomainSolution:
    """Implicit Euler for the correction u - v driven by div((gamma - 1) grad v(t)).

    Zero Neumann data and zero initial state; ``boundary`` holds the trace of
    u - v, so the Laplace transform of it is w - w0 on the boundary.
    """
    _check_body(body, grid)
    _check_medium(medium, grid)
    validate_shell(body, shell)
    times = time_grid.times
    faces = interior_faces(grid, medium.gamma)
    L = stiffness(grid, faces)
    dts, mats = _step_matrices(L, grid, times)
    sel = _scattered_faces(faces)
    pts = face_centres(grid, faces, sel)
    mesh = grid.boundary_mesh()
    u = np.zeros(grid.n_cells)
    u_prev = u
    trace = np.zeros((grid.boundary.cell.size, times.size))
    heat = [0.0]
    iters = []
    for start in range(1, times.size, block):
        stop = min(start + block, times.size)
        # incident gradients at the active faces for a block of time levels
        grads = shell_heat_gradient(pts[:, None, :], times[None, start:stop], shell) if sel.size else None
        for n in range(start, stop):
            dt = dts[n - 1]
            A = mats[float(dt)]
            rhs = (grid.cell_volume / dt) * u
            if sel.size:
                rhs = rhs + _scattered_load(grid, faces, sel, pts, grads[:, n - start, :])
            guess = 2.0 * u - u_prev if n > 1 else u
            u_prev = u
            u, info = pcg(A, rhs, A.diagonal(), x0=guess, config=config)
            trace[:, n] = boundary_trace(grid, u)
            heat.append(grid.cell_volume * float(np.sum(u)))
            iters.append(info.iterations)
    return TimeDomainSolution(BoundarySeries(mesh, times, trace), u, np.array(heat), iters)
