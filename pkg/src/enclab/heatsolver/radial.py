"""Finite-volume solvers for concentric configurations in the radial variable.

Ball body, ball inclusion and shell share the centre p, so every field depends
on r = |x - p| only.  Cells are the spherical shells [r_k, r_{k+1}] with
volume (r_{k+1}^3 - r_k^3)/3 and face area r_k^2 (per unit solid angle); the
face at r = 0 has zero area, which encodes the regularity condition u_r(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded, solveh_banded

from ..geometry import Ball, GeometryError, Inclusion, ShellSource, validate_shell
from ..potentials import profile_H, scaled_dsinhc, scaled_sinhc
from ..shellflux import TimeGrid, shell_heat_value


@dataclass(frozen=True)
class RadialGrid:
    radius: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 8:
            raise GeometryError("need at least 8 radial cells")

    @property
    def dr(self) -> float:
        return self.radius / self.n_cells

    @property
    def faces(self) -> np.ndarray:
        return np.linspace(0.0, self.radius, self.n_cells + 1)

    @property
    def centres(self) -> np.ndarray:
        f = self.faces
        return 0.5 * (f[:-1] + f[1:])

    @property
    def volumes(self) -> np.ndarray:
        f = self.faces
        return (f[1:] ** 3 - f[:-1] ** 3) / 3.0


def radial_gamma(grid: RadialGrid, inclusion: Inclusion) -> np.ndarray:
    """Cell conductivities 1 + h * (volume fraction inside the inclusion radius)."""
    if inclusion.empty:
        return np.ones(grid.n_cells)
    a = inclusion.balls[0].radius
    f = grid.faces
    inner = np.clip(np.minimum(f[1:], a) ** 3 - f[:-1] ** 3, 0.0, None) / 3.0
    return 1.0 + inclusion.h * inner / grid.volumes


@dataclass
class RadialOperator:
    grid: RadialGrid
    gamma: np.ndarray
    face_gamma: np.ndarray  # interior faces 1..n-1
    coupling: np.ndarray  # gamma_f r_f^2 / dr on interior faces

    def banded(self, shift_per_volume: float) -> np.ndarray:
        """Upper banded form of L + shift * V for scipy's symmetric banded solvers."""
        n = self.grid.n_cells
        diag = shift_per_volume * self.grid.volumes
        diag[:-1] += self.coupling
        diag[1:] += self.coupling
        ab = np.zeros((2, n))
        ab[0, 1:] = -self.coupling
        ab[1] = diag
        return ab


def radial_operator(grid: RadialGrid, gamma: np.ndarray) -> RadialOperator:
    fg = 2.0 * gamma[:-1] * gamma[1:] / (gamma[:-1] + gamma[1:])
    rf = grid.faces[1:-1]
    return RadialOperator(grid, gamma, fg, fg * rf**2 / grid.dr)


def radial_trace(grid: RadialGrid, values: np.ndarray, dnu=0.0):
    """Quadratic extrapolation to r = radius from the last two cells and the slope."""
    return (9.0 * values[-1] - values[-2] + 3.0 * grid.dr * np.asarray(dnu)) / 8.0


@dataclass
class RadialSolution:
    r: np.ndarray
    field: np.ndarray  # final (time-domain) or only (elliptic) cell values
    boundary: np.ndarray  # scalar (elliptic) or one value per time node
    times: np.ndarray | None = None
    heat: np.ndarray | None = None  # 4 pi sum(V u) per time node


def _check_concentric(body, inclusion: Inclusion, shell: ShellSource):
    if not isinstance(body, Ball):
        raise GeometryError("radial mode needs a ball body")
    if not np.allclose(body.center, shell.p, rtol=0, atol=1e-12):
        raise GeometryError("non-concentric configuration: probe point must be the body centre")
    if len(inclusion.balls) > 1:
        raise GeometryError("non-concentric configuration: radial mode takes a single ball inclusion")
    for ball in inclusion.balls:
        if not np.allclose(ball.center, body.center, rtol=0, atol=1e-12):
            raise GeometryError("non-concentric configuration: inclusion must share the body centre")
        if ball.radius >= body.radius:
            raise GeometryError("inclusion must lie inside the body")
    validate_shell(body, shell)


def _w0_slope(r, shell, s):
    return profile_H(s, shell.r1, shell.r2) * np.asarray(scaled_dsinhc(r, s, shell.r1))


def _transfer(length, kappa):
    """Map of (v, v') across a homogeneous stretch, v = r u and v'' = kappa^2 v."""
    x = kappa * length
    c, sh = np.cosh(x), np.sinh(x)
    shk = np.where(x > 0, sh / np.where(kappa > 0, kappa, 1.0), length)
    return np.stack([np.stack([c, shk], -1), np.stack([kappa * sh, c], -1)], -2)


def _solve_transfer(grid: RadialGrid, inclusion: Inclusion, shell: ShellSource, tau: float, scattered: bool):
    """Exact three-point scheme for the elliptic radial problem.

    Between neighbouring nodes the field is a combination of sinh(k r)/r and
    cosh(k r)/r with k = s / sqrt(gamma), so the fluxes at the ends of each
    stretch are exact affine functions of the two node values.  Nodes are the
    cell centres plus r = R; flux balance at every node gives a tridiagonal
    system whose solution is the continuum solution sampled at the nodes.

    In scattered mode the unknown is w inside D and w - w0 outside, which
    keeps the exponentially small boundary value free of cancellation.
    """
    s = np.sqrt(tau)
    R = grid.radius
    nodes = np.append(grid.centres, R)
    a = inclusion.balls[0].radius if not inclusion.empty else -1.0
    gin = 1.0 + inclusion.h if not inclusion.empty else 1.0
    inside = nodes < a
    gam = np.where(inside, gin, 1.0)
    kap_in, kap_out = s / np.sqrt(gin), s
    # one stretch per node: [previous node (or 0), node]
    x0 = np.concatenate([[0.0], nodes[:-1]])
    x1 = nodes
    crosses = (x0 < a) & (a <= x1)
    kap = np.where(x1 <= a, kap_in, kap_out)
    phi = _transfer(x1 - x0, kap)
    shift = np.zeros((nodes.size, 2))
    for j in np.flatnonzero(crosses):
        jump = np.array([[1.0, 0.0], [(1.0 - gin) / a, gin]])
        phi[j] = _transfer(x1[j] - a, kap_out) @ jump @ _transfer(a - x0[j], kap_in)
        if scattered:
            # switch from w to w - w0 at the interface
            K = profile_H(s, shell.r1, shell.r2)
            w0 = K * scaled_sinhc(a, s, shell.r1)
            dw0 = K * float(scaled_dsinhc(a, s, shell.r1))
            shift[j] = _transfer(x1[j] - a, kap_out) @ (-np.array([a * w0, w0 + a * dw0]))
    # end fluxes F = gamma (r v' - v) = gamma r^2 u' of each stretch, affine in its end values:
    # v0 = x0 u0, v1 = x1 u1, p0 = (v1 - p11 v0 - shift1) / p12, p1 = p21 v0 + p22 p0 + shift2
    p11, p12, p21, p22 = phi[:, 0, 0], phi[:, 0, 1], phi[:, 1, 0], phi[:, 1, 1]
    g0 = np.concatenate([[gam[0]], gam[:-1]])
    d0, d1, e0 = -p11 * x0 / p12, x1 / p12, -shift[:, 0] / p12
    start0, start1, start_c = g0 * (x0 * d0 - x0), g0 * x0 * d1, g0 * x0 * e0
    end0 = gam * x1 * (p21 * x0 + p22 * d0)
    end1 = gam * (x1 * p22 * d1 - x1)
    end_c = gam * x1 * (p22 * e0 + shift[:, 1])
    # node k: start flux of stretch k+1 equals end flux of stretch k; at r = R the end flux is the data
    n = nodes.size
    ab = np.zeros((3, n))
    ab[0, 1:] = start1[1:]
    ab[1] = -end1
    ab[1, :-1] += start0[1:]
    ab[2, :-1] = -end0[1:]
    rhs = end_c.copy()
    rhs[:-1] -= start_c[1:]
    if not scattered:
        rhs[-1] -= R * R * profile_H(s, shell.r1, shell.r2) * float(scaled_dsinhc(R, s, shell.r1))
    u = solve_banded((1, 1), ab, rhs)
    if scattered and np.any(inside):
        u[inside] -= profile_H(s, shell.r1, shell.r2) * scaled_sinhc(nodes[inside], s, shell.r1)
    return u


def solve_radial(body: Ball, inclusion: Inclusion, shell: ShellSource, *, tau: float | None = None,
                 time_grid: TimeGrid | None = None, n_cells: int = 4000, scattered: bool = False,
                 u0=None, scheme: str = "transfer") -> RadialSolution:
    """Radial solve of the elliptic (``tau``) or the time-domain (``time_grid``) problem.

    Total-field mode prescribes the shell data as flux at r = R: the analytic
    d_r w0 for the elliptic problem and d_r v(R, t) in time.  Scattered mode
    returns w - w0 (or u - v) with zero flux.

    The elliptic problem uses the exact three-point scheme by default
    (``scheme="transfer"``); ``scheme="fv"`` selects the second-order finite
    volumes that the time-domain path always uses.
    """
    if scheme not in ("transfer", "fv"):
        raise ValueError(f"scheme must be 'transfer' or 'fv', got {scheme!r}")
    if (tau is None) == (time_grid is None):
        raise ValueError("give exactly one of tau (elliptic) or time_grid (time domain)")
    _check_concentric(body, inclusion, shell)
    grid = RadialGrid(body.radius, n_cells)
    op = radial_operator(grid, radial_gamma(grid, inclusion))
    R = body.radius
    active = np.flatnonzero(op.face_gamma != 1.0)
    r_act = grid.faces[1:-1][active]
    weight = (op.face_gamma[active] - 1.0) * r_act**2

    def scattered_load(slope):
        load = np.zeros(n_cells)
        np.add.at(load, active, weight * slope)
        np.add.at(load, active + 1, -weight * slope)
        return load

    if tau is not None:
        if not tau > 0:
            raise ValueError(f"tau must be positive, got {tau}")
        s = np.sqrt(tau)
        if scheme == "transfer":
            u = _solve_transfer(grid, inclusion, shell, tau, scattered)
            return RadialSolution(grid.centres, u[:-1], float(u[-1]))
        ab = op.banded(tau)
        if scattered:
            rhs = scattered_load(_w0_slope(r_act, shell, s))
            g = 0.0
        else:
            g = float(_w0_slope(R, shell, s))
            rhs = np.zeros(n_cells)
            rhs[-1] = R * R * g
        w = solveh_banded(ab, rhs) if np.any(rhs) else np.zeros(n_cells)
        return RadialSolution(grid.centres, w, float(radial_trace(grid, w, g)))

    times = time_grid.times
    dt = time_grid.dt
    chol = cholesky_banded(op.banded(1.0 / dt))
    u = np.zeros(n_cells) if u0 is None else np.array(u0, dtype=float)
    boundary = np.empty(times.size)
    heat = np.empty(times.size)
    flux = np.zeros(times.size) if scattered else shell_heat_value(R, times, shell)[1]
    boundary[0] = radial_trace(grid, u, flux[0])
    heat[0] = 4 * np.pi * np.sum(grid.volumes * u)
    block = 256
    for start in range(1, times.size, block):
        stop = min(start + block, times.size)
        if scattered and active.size:
            slopes = shell_heat_value(r_act[:, None], times[None, start:stop], shell)[1]
        for n in range(start, stop):
            rhs = grid.volumes / dt * u
            if scattered:
                if active.size:
                    rhs += scattered_load(slopes[:, n - start])
            else:
                rhs[-1] += R * R * flux[n]
            u = cho_solve_banded((chol, False), rhs)
            boundary[n] = radial_trace(grid, u, flux[n])
            heat[n] = 4 * np.pi * np.sum(grid.volumes * u)
    return RadialSolution(grid.centres, u, boundary, times, heat)
