"""Shapes, probe geometry, enclosing radii and boundary quadrature meshes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class GeometryError(ValueError):
    """Raised for invalid or inconsistent geometric configurations."""


def as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(3)
    if not np.all(np.isfinite(p)):
        raise GeometryError(f"point has non-finite components: {p}")
    return p


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius > 0:
            raise GeometryError(f"ball radius must be positive, got {self.radius}")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.center, axis=-1) < self.radius


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", as_point(self.lo))
        object.__setattr__(self, "hi", as_point(self.hi))
        if not np.all(self.hi > self.lo):
            raise GeometryError(f"box must have nonempty interior: lo={self.lo}, hi={self.hi}")

    @property
    def corners(self) -> np.ndarray:
        idx = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)])
        return np.where(idx == 0, self.lo, self.hi)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x > self.lo) & (x < self.hi), axis=-1)


@dataclass(frozen=True)
class BallUnion:
    balls: tuple

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        if not self.balls:
            raise GeometryError("a union of balls needs at least one ball")

    def contains(self, x) -> np.ndarray:
        return np.any([b.contains(x) for b in self.balls], axis=0)


Shape = Union[Ball, Box, BallUnion]


@dataclass(frozen=True)
class Inclusion:
    """Conductivity inclusion D with uniform jump ``h`` (gamma = 1 + h inside D).

    ``shape`` may be ``None`` for the inclusion-free medium.
    """

    shape: Union[Ball, BallUnion, None]
    h: float = 0.0

    def __post_init__(self):
        if self.shape is not None:
            if self.h == 0.0:
                raise GeometryError("a nonempty inclusion needs a nonzero jump h")
            if not 1.0 + self.h > 0.0:
                raise GeometryError(f"conductivity 1 + h must stay positive, got h={self.h}")

    @property
    def empty(self) -> bool:
        return self.shape is None

    @property
    def balls(self) -> tuple:
        if self.shape is None:
            return ()
        if isinstance(self.shape, Ball):
            return (self.shape,)
        return self.shape.balls


@dataclass(frozen=True)
class ShellSource:
    """Probe point ``p`` with the shell radii R1 < R2 of the initial datum."""

    p: np.ndarray
    r1: float
    r2: float

    def __post_init__(self):
        object.__setattr__(self, "p", as_point(self.p))
        if not 0 < self.r1:
            raise GeometryError(f"R1 must be positive, got {self.r1}")
        if not self.r2 > self.r1:
            raise GeometryError(f"radius order violated: need R2 > R1, got R1={self.r1}, R2={self.r2}")


@dataclass(frozen=True)
class BoundaryMesh:
    """Quadrature nodes on the body surface.

    For box bodies ``face`` holds (axis, side, i, j) per node so that grid
    solvers can map nodes onto boundary faces.
    """

    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    face: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.weights)

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values) -> float:
        values = np.asarray(values)
        if values.shape[0] != len(self):
            raise GeometryError(f"expected {len(self)} nodal values, got {values.shape[0]}")
        return float(np.dot(self.weights, values))


def enclosing_radius(shape: Shape, p) -> float:
    """Radius of the smallest sphere centred at ``p`` that encloses ``shape``."""
    p = as_point(p)
    if isinstance(shape, Ball):
        return float(np.linalg.norm(shape.center - p) + shape.radius)
    if isinstance(shape, Box):
        return float(np.max(np.linalg.norm(shape.corners - p, axis=1)))
    if isinstance(shape, BallUnion):
        return max(enclosing_radius(b, p) for b in shape.balls)
    if isinstance(shape, Inclusion):
        if shape.empty:
            raise GeometryError("empty inclusion has no enclosing radius")
        return enclosing_radius(shape.shape, p)
    raise GeometryError(f"unsupported shape kind: {type(shape).__name__}")


def default_shell_margin(r1: float) -> float:
    return 1e-3 * r1


def validate_shell(body: Shape, shell: ShellSource, eps_shell: float | None = None) -> float:
    """Check that the body sits strictly inside B_{R1}(p); return R1 - R_body(p)."""
    if not shell.r2 > shell.r1:
        raise GeometryError(f"radius order violated: need R2 > R1, got R1={shell.r1}, R2={shell.r2}")
    eps = default_shell_margin(shell.r1) if eps_shell is None else eps_shell
    margin = shell.r1 - enclosing_radius(body, shell.p)
    if margin <= eps:
        raise GeometryError(
            f"shell must enclose body: R1={shell.r1} but the body reaches radius "
            f"{shell.r1 - margin:.6g} from p (margin {margin:.3g}, required > {eps:.3g})"
        )
    return margin


def _ball_clearance(ball: Ball, body: Shape) -> float:
    if isinstance(body, Ball):
        return body.radius - np.linalg.norm(ball.center - body.center) - ball.radius
    if isinstance(body, Box):
        return float(np.min(np.concatenate([ball.center - body.lo, body.hi - ball.center]))) - ball.radius
    raise GeometryError(f"unsupported body kind: {type(body).__name__}")


def inclusion_margin(body: Shape, inclusion: Inclusion) -> float:
    """Distance between the inclusion and the body surface (positive when D is inside)."""
    if inclusion.empty:
        return np.inf
    return min(_ball_clearance(b, body) for b in inclusion.balls)


def _sphere_mesh(ball: Ball, n: int) -> BoundaryMesh:
    n_theta, n_phi = n, 2 * n
    theta_edges = np.linspace(0.0, np.pi, n_theta + 1)
    phi_edges = np.linspace(0.0, 2 * np.pi, n_phi + 1)
    theta = 0.5 * (theta_edges[:-1] + theta_edges[1:])
    phi = 0.5 * (phi_edges[:-1] + phi_edges[1:])
    # exact band areas: r^2 (cos a - cos b) dphi
    band = ball.radius**2 * (np.cos(theta_edges[:-1]) - np.cos(theta_edges[1:]))
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    normals = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1).reshape(-1, 3)
    weights = np.repeat(band, n_phi) * (2 * np.pi / n_phi)
    return BoundaryMesh(ball.center + ball.radius * normals, normals, weights)


def box_face_layout(box: Box, n: Sequence[int]):
    """Boundary faces of a cell-centred grid on ``box``.

    Returns (points, normals, weights, face) ordered by axis, then side
    (low, high), then the two tangential indices in C order.
    """
    n = np.asarray(n, dtype=int)
    spacing = (box.hi - box.lo) / n
    pts, nrm, wts, faces = [], [], [], []
    for axis in range(3):
        t1, t2 = [a for a in range(3) if a != axis]
        i, j = np.meshgrid(np.arange(n[t1]), np.arange(n[t2]), indexing="ij")
        i, j = i.ravel(), j.ravel()
        for side in (0, 1):
            x = np.empty((i.size, 3))
            x[:, axis] = box.lo[axis] if side == 0 else box.hi[axis]
            x[:, t1] = box.lo[t1] + (i + 0.5) * spacing[t1]
            x[:, t2] = box.lo[t2] + (j + 0.5) * spacing[t2]
            normal = np.zeros((i.size, 3))
            normal[:, axis] = -1.0 if side == 0 else 1.0
            pts.append(x)
            nrm.append(normal)
            wts.append(np.full(i.size, spacing[t1] * spacing[t2]))
            faces.append(np.stack([np.full(i.size, axis), np.full(i.size, side), i, j], axis=1))
    return np.concatenate(pts), np.concatenate(nrm), np.concatenate(wts), np.concatenate(faces)


def boundary_mesh(body: Shape, resolution) -> BoundaryMesh:
    """Surface quadrature for a ball (latitude-longitude rule) or a box (face grid).

    ``resolution`` is the number of polar bands for a ball, and the number of
    cells per axis (int or 3-sequence) for a box, giving 2*(nx*ny + ny*nz + nx*nz)
    face nodes.
    """
    if isinstance(body, Ball):
        n = int(resolution)
        if n < 2:
            raise GeometryError("resolution must be at least 2")
        return _sphere_mesh(body, n)
    if isinstance(body, Box):
        n = np.broadcast_to(np.asarray(resolution, dtype=int), (3,))
        if np.any(n < 2):
            raise GeometryError("resolution must be at least 2")
        return BoundaryMesh(*box_face_layout(body, n))
    raise GeometryError(f"unsupported body kind: {type(body).__name__}")
