"""Cell-centred grids on box bodies, conductivity fields and the finite-volume operator.

Cells are numbered in C order, ``idx = (i * ny + j) * nz + k``.  The diffusion
operator is assembled face by face with harmonic-mean face conductivities, so
the discrete flux is continuous across the inclusion boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..geometry import Ball, BoundaryMesh, Box, GeometryError, Inclusion, box_face_layout


@dataclass(frozen=True)
class Grid:
    box: Box
    n: tuple

    def __post_init__(self):
        n = tuple(int(k) for k in np.broadcast_to(np.asarray(self.n, dtype=int), (3,)))
        if min(n) < 8:
            raise GeometryError(f"need at least 8 cells per axis, got {n}")
        object.__setattr__(self, "n", n)

    @property
    def spacing(self) -> np.ndarray:
        return (self.box.hi - self.box.lo) / np.array(self.n)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_centres(self, axis: int) -> np.ndarray:
        return self.box.lo[axis] + (np.arange(self.n[axis]) + 0.5) * self.spacing[axis]

    def face_area(self, axis: int) -> float:
        h = self.spacing
        return float(np.prod([h[a] for a in range(3) if a != axis]))

    def centres(self) -> np.ndarray:
        """Cell centres, shape (n_cells, 3)."""
        axes = np.meshgrid(*(self.axis_centres(a) for a in range(3)), indexing="ij")
        return np.stack([a.ravel() for a in axes], axis=1)

    def index(self, i, j, k):
        return (np.asarray(i) * self.n[1] + np.asarray(j)) * self.n[2] + np.asarray(k)

    def boundary_mesh(self) -> BoundaryMesh:
        return BoundaryMesh(*box_face_layout(self.box, self.n))

    @cached_property
    def boundary(self) -> "BoundaryFaces":
        return _boundary_faces(self)


@dataclass(frozen=True)
class BoundaryFaces:
    """Boundary faces in the node order of ``Grid.boundary_mesh``.

    ``cell`` is the adjacent cell, ``inner`` the next cell inward (used for
    the quadratic trace extrapolation), ``h`` the spacing normal to the face.
    """

    cell: np.ndarray
    inner: np.ndarray
    area: np.ndarray
    h: np.ndarray
    face: np.ndarray


def _boundary_faces(grid: Grid) -> BoundaryFaces:
    cells, inner, area, hn, faces = [], [], [], [], []
    for axis in range(3):
        t1, t2 = [a for a in range(3) if a != axis]
        a, b = np.meshgrid(np.arange(grid.n[t1]), np.arange(grid.n[t2]), indexing="ij")
        a, b = a.ravel(), b.ravel()
        for side in (0, 1):
            ijk = [None, None, None]
            ijk[t1], ijk[t2] = a, b
            edge = 0 if side == 0 else grid.n[axis] - 1
            step = 1 if side == 0 else -1
            ijk[axis] = np.full(a.size, edge)
            cells.append(grid.index(*ijk))
            ijk[axis] = np.full(a.size, edge + step)
            inner.append(grid.index(*ijk))
            area.append(np.full(a.size, grid.face_area(axis)))
            hn.append(np.full(a.size, grid.spacing[axis]))
            faces.append(np.stack([np.full(a.size, axis), np.full(a.size, side), a, b], axis=1))
    return BoundaryFaces(*(np.concatenate(x) for x in (cells, inner, area, hn, faces)))


def check_mesh(grid: Grid, mesh: BoundaryMesh):
    """Raise unless ``mesh`` is the face mesh of ``grid``."""
    if mesh.face is None or len(mesh) != len(grid.boundary.cell) or not np.array_equal(mesh.face, grid.boundary.face):
        raise GeometryError("boundary mesh does not match the grid's boundary faces")
    if not np.allclose(mesh.weights, grid.boundary.area, rtol=1e-12, atol=0):
        raise GeometryError("boundary mesh weights do not match the grid's face areas")


@dataclass(frozen=True)
class MediumField:
    """Per-cell conductivity gamma = 1 + h * (volume fraction of D)."""

    gamma: np.ndarray
    h: float
    chi: np.ndarray

    def __post_init__(self):
        if not np.all(self.gamma > 0):
            raise GeometryError("conductivity must be positive in every cell")


def _ball_fraction(centres, spacing, ball: Ball, sub: int) -> np.ndarray:
    d = np.linalg.norm(centres - ball.center, axis=1)
    half_diag = 0.5 * np.linalg.norm(spacing)
    frac = (d < ball.radius - half_diag).astype(float)
    cut = np.flatnonzero(np.abs(d - ball.radius) <= half_diag)
    if cut.size:
        offs = (np.arange(sub) + 0.5) / sub - 0.5
        o = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), axis=-1).reshape(-1, 3) * spacing
        for chunk in np.array_split(cut, max(1, cut.size // 4096)):
            pts = centres[chunk, None, :] + o[None, :, :]
            frac[chunk] = np.mean(np.linalg.norm(pts - ball.center, axis=2) < ball.radius, axis=1)
    return frac


def medium_from_inclusion(grid: Grid, inclusion: Inclusion, subsamples: int = 4) -> MediumField:
    """Sample the inclusion on the grid by cell volume fractions.

    Cells cut by a sphere are sub-sampled with ``subsamples**3`` points; for
    a union of balls the fractions are combined with a pointwise maximum.
    """
    if inclusion.empty:
        ones = np.ones(grid.n_cells)
        return MediumField(ones, 0.0, np.zeros(grid.n_cells, dtype=bool))
    centres = grid.centres()
    frac = np.zeros(grid.n_cells)
    for ball in inclusion.balls:
        frac = np.maximum(frac, _ball_fraction(centres, grid.spacing, ball, subsamples))
    gamma = 1.0 + inclusion.h * frac
    return MediumField(gamma, float(inclusion.h), frac >= 0.5)


def harmonic(a, b):
    return 2.0 * a * b / (a + b)


@dataclass(frozen=True)
class InteriorFaces:
    lo: np.ndarray
    hi: np.ndarray
    axis: np.ndarray
    coef: np.ndarray  # gamma_f * area / h
    gamma: np.ndarray


def interior_faces(grid: Grid, gamma: np.ndarray) -> InteriorFaces:
    g = gamma.reshape(grid.n)
    idx = np.arange(grid.n_cells).reshape(grid.n)
    lo, hi, axis, coef, gf = [], [], [], [], []
    for a in range(3):
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_lo[a] = slice(0, -1)
        sl_hi[a] = slice(1, None)
        gface = harmonic(g[tuple(sl_lo)], g[tuple(sl_hi)]).ravel()
        lo.append(idx[tuple(sl_lo)].ravel())
        hi.append(idx[tuple(sl_hi)].ravel())
        axis.append(np.full(gface.size, a))
        coef.append(gface * grid.face_area(a) / grid.spacing[a])
        gf.append(gface)
    return InteriorFaces(*(np.concatenate(x) for x in (lo, hi, axis, coef, gf)))


def stiffness(grid: Grid, faces: InteriorFaces) -> sp.csr_matrix:
    """Symmetric positive semidefinite matrix of -div(gamma grad) integrated over cells."""
    n = grid.n_cells
    rows = np.concatenate([faces.lo, faces.hi, faces.lo, faces.hi])
    cols = np.concatenate([faces.lo, faces.hi, faces.hi, faces.lo])
    vals = np.concatenate([faces.coef, faces.coef, -faces.coef, -faces.coef])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def face_centres(grid: Grid, faces: InteriorFaces, select=None) -> np.ndarray:
    """Centres of the interior faces (optionally a subset given by ``select``)."""
    lo = faces.lo if select is None else faces.lo[select]
    axis = faces.axis if select is None else faces.axis[select]
    i, rem = np.divmod(lo, grid.n[1] * grid.n[2])
    j, k = np.divmod(rem, grid.n[2])
    pts = np.stack([grid.axis_centres(0)[i], grid.axis_centres(1)[j], grid.axis_centres(2)[k]], axis=1)
    pts[np.arange(len(lo)), axis] += 0.5 * grid.spacing[axis]
    return pts
