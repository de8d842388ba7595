"""Jacobi-preconditioned conjugate gradients.

Inner products use ``np.sum(a * b)`` (pairwise summation in a fixed order), so
results do not depend on BLAS threading.  The right-hand side is rescaled to
unit maximum before iterating: scattered-field sources can be far below the
range in which squared norms stay representable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SolverError(RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    """Linear-solve controls shared by all grid solvers."""

    tol: float = 1e-10
    max_iter: int = 50000

    def __post_init__(self):
        if not 0 < self.tol <= 1e-4:
            raise ValueError(f"tolerance must lie in (0, 1e-4], got {self.tol}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class CGInfo:
    iterations: int
    residual: float


def _dot(a, b):
    return float(np.sum(a * b))


def pcg(A, b, diag, x0=None, config: SolverConfig = SolverConfig()):
    """Solve A x = b for symmetric positive definite A.

    Stops when ||b - A x|| <= tol ||b||.  Returns ``(x, CGInfo)``.
    """
    b = np.asarray(b, dtype=float)
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    if scale == 0.0:
        return np.zeros_like(b), CGInfo(0, 0.0)
    bs = b / scale
    inv = 1.0 / diag
    if x0 is None:
        x = np.zeros_like(b)
        r = bs.copy()
    else:
        x = np.asarray(x0, dtype=float) / scale
        r = bs - A @ x
    bnorm = np.sqrt(_dot(bs, bs))
    target = config.tol * bnorm
    rnorm = np.sqrt(_dot(r, r))
    if rnorm <= target:
        return x * scale, CGInfo(0, rnorm / bnorm)
    z = inv * r
    p = z.copy()
    rz = _dot(r, z)
    for it in range(1, config.max_iter + 1):
        q = A @ p
        alpha = rz / _dot(p, q)
        x += alpha * p
        r -= alpha * q
        rnorm = np.sqrt(_dot(r, r))
        if rnorm <= target:
            return x * scale, CGInfo(it, rnorm / bnorm)
        z = inv * r
        rz_new = _dot(r, z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise SolverError(
        f"conjugate gradients did not converge in {config.max_iter} iterations "
        f"(relative residual {rnorm / bnorm:.3e}, target {config.tol:.1e})",
        iterations=config.max_iter,
        residual=rnorm / bnorm,
    )
