"""Modified-Helmholtz volume potentials of radial shell data.

All formulas use the spectral variable ``s = sqrt(tau)``; the potential of a
density ``q`` is ``int exp(-s|x-y|)/|x-y| q(y) dy`` (the 1/(4 pi)-normalised
version is used for the shell differences and profiles).

The interior profile of every shell potential is proportional to
``exp(-s R1) sinh(s r)/r``; that product is evaluated in scaled form so that
large ``s`` never overflows.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy import integrate

SINH_CAP = 700.0

# weights of |y-p|^j, j = 0..2, in (R2 - rho)(R1 - rho)
def _heat_weights(r1, r2):
    return (r1 * r2, -(r1 + r2), 1.0)


# weights of |y-p|^j, j = 0..4, in (R1 - rho)^2 (R2 - rho)^2
def _elastic_weights(r1, r2):
    return (
        (r1 * r2) ** 2,
        -2.0 * r1 * r2 * (r1 + r2),
        (r1 + r2) ** 2 + 2.0 * r1 * r2,
        -2.0 * (r1 + r2),
        1.0,
    )


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralParam:
    """Laplace parameter ``tau`` together with ``s = sqrt(tau)``."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def s(self) -> float:
        return float(np.sqrt(self.tau))

    @classmethod
    def from_s(cls, s: float) -> "SpectralParam":
        return cls(float(s) ** 2)


def sinhc_s(r, s, cap: float = SINH_CAP):
    """sinh(s r)/r, extended by its limit ``s`` at r = 0."""
    r = np.asarray(r, dtype=float)
    x = s * r
    if np.any(x > cap):
        raise OverflowError(
            f"s*r = {np.max(x):.4g} exceeds {cap}; use scaled_sinhc with an exponential shift"
        )
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    direct = np.sinh(xs) / np.where(small, 1.0, r)
    series = s * (1.0 + x * x / 6.0 + x**4 / 120.0)
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


def scaled_sinhc(r, s, shift):
    """exp(-s*shift) * sinh(s r)/r without overflow (r >= 0, typically r < shift)."""
    r = np.asarray(r, dtype=float)
    x = s * r
    rr = np.where(r > 0, r, 1.0)
    # (1 - exp(-2x)) / (2 r), limit s at r = 0
    ratio = np.where(r > 0, -np.expm1(-2.0 * x) / (2.0 * rr), s)
    out = np.exp(-s * (shift - r)) * ratio
    return out if out.ndim else float(out)


def scaled_dsinhc(r, s, shift):
    """exp(-s*shift) * d/dr[sinh(s r)/r] = exp(-s*shift) (s cosh(s r)/r - sinh(s r)/r^2)."""
    r = np.asarray(r, dtype=float)
    x = s * r
    small = x < 1e-2
    xs = np.where(small, 1.0, x)
    # (x cosh x - sinh x)/x^2 = [e^x (x-1) + e^-x (x+1)] / (2 x^2)
    big = 0.5 * (np.exp(xs - s * shift) * (xs - 1.0) + np.exp(-xs - s * shift) * (xs + 1.0)) / xs**2
    ser = np.exp(-s * shift) * (x / 3.0 + x**3 / 30.0 + x**5 / 840.0)
    out = s * s * np.where(small, ser, big)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# ball potentials v_j and the recurrence between them


def _check_interior(eta, r):
    if not 0 <= r < eta:
        raise ValueError(f"evaluation radius must satisfy 0 <= r < eta, got r={r}, eta={eta}")


def vj_quadrature(j: int, eta: float, s: float, r: float, tol: float = 1e-10) -> float:
    """Adaptive quadrature of int_{|y|<eta} exp(-s|x-y|)/|x-y| |y|^j dy at |x| = r.

    The angular integral is done analytically; the remaining radial integral
    is split at rho = r where the kernel has its kink.
    """
    if j < -1:
        raise ValueError("j must be >= -1")
    _check_interior(eta, r)
    k = j + 1
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
    if r == 0.0:
        val, err = integrate.quad(lambda q: np.exp(-s * q) * q**k, 0.0, eta, **opts)
        val, err = 4 * np.pi * val, 4 * np.pi * err
    else:
        # rho < r: exp(-s r) 2 sinh(s rho); rho > r: 2 sinh(s r) exp(-s rho)
        inner, e1 = integrate.quad(lambda q: np.exp(-s * (r - q)) * (-np.expm1(-2 * s * q)) * q**k, 0.0, r, **opts)
        outer, e2 = integrate.quad(lambda q: np.exp(-s * (q - r)) * (-np.expm1(-2 * s * r)) * q**k, r, eta, **opts)
        scale = 2 * np.pi / (s * r)
        val, err = scale * (inner + outer), scale * (e1 + e2)
    if not err <= max(tol * abs(val), 1e-300):
        raise QuadratureError(f"v_{j} quadrature did not converge: estimated error {err:.3g}, value {val:.6g}")
    return float(val)


def vj_seed(j: int, eta: float, s: float, r: float) -> float:
    """Closed forms of v_{-1} and v_0 (the seeds of the two recurrence chains)."""
    _check_interior(eta, r)
    if j == 0:
        return float(4 * np.pi / s**2 * (1.0 - (eta + 1.0 / s) * scaled_sinhc(r, s, eta)))
    if j == -1:
        if r == 0.0:
            return float(4 * np.pi * (-np.expm1(-s * eta)) / s)
        # K_{-1}(r) = [(1 - e^{-sr}) + (1 - e^{-s(eta-r)}) - e^{-sr}(1 - e^{-s eta})] / s,
        # factored as (1 - e^{-sr})(2 - e^{-s(eta-r)}(1 + e^{-sr})) / s to avoid cancellation
        k = -np.expm1(-s * r) * (2.0 - np.exp(-s * (eta - r)) * (1.0 + np.exp(-s * r))) / s
        return float(2 * np.pi / (r * s) * k)
    raise ValueError("closed-form seeds exist for j = -1 and j = 0 only")


def vj_recurrence(j: int, eta: float, s: float, r: float, v_jm2: float) -> float:
    """v_j from v_{j-2} at the same (eta, s, r) for j >= 1."""
    if j < 1:
        raise ValueError("the recurrence holds for j >= 1")
    _check_interior(eta, r)
    # {r^{j+1} - (eta + (j+1)/s) eta^j e^{-s eta} sinh(s r)} / r
    brace = r**j - (eta + (j + 1) / s) * eta**j * scaled_sinhc(r, s, eta)
    return float(j * (j + 1) / s**2 * v_jm2 + 4 * np.pi / s**2 * brace)


def vj_chain(j: int, eta: float, s: float, r: float, seed: str = "closed") -> float:
    """v_j by chaining the recurrence from v_{-1} (odd j) or v_0 (even j)."""
    if j < -1:
        raise ValueError("j must be >= -1")
    start = -1 if j % 2 else 0
    if seed == "closed":
        v = vj_seed(start, eta, s, r)
    elif seed == "quadrature":
        v = vj_quadrature(start, eta, s, r)
    else:
        raise ValueError(f"unknown seed {seed!r}")
    for k in range(start + 2, j + 1, 2):
        v = vj_recurrence(k, eta, s, r, v)
    return v


# ---------------------------------------------------------------------------
# shell differences and profile coefficients


def shell_diff(j: int, s: float, r1: float, r2: float) -> float:
    """Coefficient c_j with (v_j over B_R2 - v_j over B_R1)/(4 pi) = c_j e^{-s R1} sinh(s r)/r, r < R1."""
    if not 0 < r1 < r2:
        raise ValueError(f"need 0 < R1 < R2, got R1={r1}, R2={r2}")
    e = np.exp(-s * (r2 - r1))
    if j == 0:
        return ((r1 + 1 / s) - (r2 + 1 / s) * e) / s**2
    if j == 1:
        return ((r1**2 + 2 * r1 / s + 2 / s**2) - (r2**2 + 2 * r2 / s + 2 / s**2) * e) / s**2
    if j == 2:
        def poly(r):
            return r**3 + 3 * r**2 / s + 6 * r / s**2 + 6 / s**3
        return (poly(r1) - poly(r2) * e) / s**2
    if j == 3:
        tail = (r1 + 4 / s) * r1**3 - (r2 + 4 / s) * r2**3 * e
        return (12 * shell_diff(1, s, r1, r2) + tail) / s**2
    if j == 4:
        tail = (r1 + 5 / s) * r1**4 - (r2 + 5 / s) * r2**4 * e
        return (20 * shell_diff(2, s, r1, r2) + tail) / s**2
    raise ValueError(f"shell differences are tabulated for j in 0..4, got {j}")


def shell_diff_table(s: float, r1: float, r2: float) -> dict:
    return {j: shell_diff(j, s, r1, r2) for j in range(5)}


def profile_H(s: float, r1: float, r2: float) -> float:
    """Coefficient H of the heat profile w00 = H e^{-s R1} sinh(s|x-p|)/|x-p| inside B_R1(p)."""
    return float(sum(w * shell_diff(j, s, r1, r2) for j, w in enumerate(_heat_weights(r1, r2))))


def M_coeff(s: float, r1: float, r2: float) -> float:
    """Coefficient M of the elastic profile J(x) = M e^{-s R1} sinh(s|x-p|)/|x-p|."""
    return float(sum(w * shell_diff(j, s, r1, r2) for j, w in enumerate(_elastic_weights(r1, r2))))


def shifted_profile(s: float, r1: float, r2: float, density: str = "heat") -> float:
    """Profile coefficient from the shifted-moment form (no cancellation between shells).

    Uses c(s) = e^{s R1} s^{-1} int_{R1}^{R2} rho q(rho) e^{-s rho} d rho with the
    density polynomial re-expanded about rho = R1.  Independent of ``shell_diff``.
    """
    poly = np.polynomial.Polynomial
    if density == "heat":
        q = poly([r1, -1.0]) * poly([r2, -1.0])
    elif density == "elastic":
        q = (poly([r1, -1.0]) * poly([r2, -1.0])) ** 2
    else:
        raise ValueError(f"unknown density {density!r}")
    pq = poly([0.0, 1.0]) * q
    # coefficients of p(R1 + u) in u
    shifted = pq(poly([r1, 1.0])).coef
    d = s * (r2 - r1)
    total = 0.0
    for k, a in enumerate(shifted):
        # int_0^{R2-R1} u^k e^{-s u} du = k!/s^{k+1} * P(k+1, d)
        total += a * factorial(k) / s ** (k + 1) * _regularized_lower_gamma(k + 1, d)
    return total / s


def _regularized_lower_gamma(n: int, x: float) -> float:
    from scipy.special import gammainc

    return float(gammainc(n, x))


def coefficient_ABC(r1: float, r2: float):
    """Leading coefficients A, B, C of M = A s^-2 + B s^-3 + C s^-4 + O(s^-5).

    The shell coefficients expand as s^2 c_j = sum_k (j+1)!/(j+1-k)! R1^{j+1-k} s^-k
    plus exponentially small terms; A, B, C collect k = 0, 1, 2 with the
    elastic density weights.
    """
    weights = _elastic_weights(r1, r2)
    out = []
    for k in range(3):
        total = 0.0
        for j, w in enumerate(weights):
            if k <= j + 1:
                total += w * factorial(j + 1) / factorial(j + 1 - k) * r1 ** (j + 1 - k)
        out.append(total)
    return tuple(out)


# ---------------------------------------------------------------------------
# the heat profile w00


def _radius_from(x, p):
    x = np.asarray(x, dtype=float)
    return np.linalg.norm(x - p, axis=-1)


def w00_closed(x, shell, s: float):
    """Heat profile w00(x) = H e^{-s R1} sinh(s r)/r with r = |x - p| < R1."""
    r = _radius_from(x, shell.p)
    if np.any(r >= shell.r1):
        raise ValueError("w00 closed form is valid only inside B_R1(p)")
    return profile_H(s, shell.r1, shell.r2) * scaled_sinhc(r, s, shell.r1)


def w00_gradient(x, shell, s: float):
    """Analytic gradient of ``w00_closed``; shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    d = x - shell.p
    r = np.linalg.norm(d, axis=-1)
    if np.any(r >= shell.r1):
        raise ValueError("w00 closed form is valid only inside B_R1(p)")
    H = profile_H(s, shell.r1, shell.r2)
    radial = H * np.asarray(scaled_dsinhc(r, s, shell.r1))
    unit = d / np.where(r > 0, r, 1.0)[..., None]
    return radial[..., None] * unit


def w00_quadrature(r: float, s: float, r1: float, r2: float) -> float:
    """Direct radial quadrature of the shell potential of (R2-rho)(R1-rho) at |x-p| = r < R1."""
    if not 0 <= r < r1:
        raise ValueError("evaluation point must lie inside B_R1(p)")

    def f(q):
        kern = np.exp(-s * (q - r)) * (-np.expm1(-2 * s * r)) / (2 * s * r) if r > 0 else np.exp(-s * q)
        return (r2 - q) * (r1 - q) * q * kern

    val, err = integrate.quad(f, r1, r2, epsabs=0.0, epsrel=1e-13, limit=200)
    # (1/4pi) * 4pi * int rho^2 q(rho) e^{-s rho} sinh(s r)/(s r rho) d rho
    return float(val)
