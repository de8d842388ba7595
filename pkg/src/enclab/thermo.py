"""Thermoelastic extension: shell elastic source, its divergence-free profile and
the touching-ball lower bound behind the exponential rate of the elastic indicator.

The elastic probe is the curl of psi(|x - p|) a with the double-root shell
density psi(r) = (R1 - r)^2 (R2 - r)^2 on R1 < r < R2.  Its Laplace-domain
profile inside B_R1(p) is

    ws0(x) = (rho/mu) M(sigma) e^{-sigma R1} grad(sinh(sigma r)/r) x a,

with sigma = tau sqrt(rho/mu).  Norms of ws0 over a ball B touching the
inclusion from inside at its farthest point q are reduced to one-dimensional
radial integrals over the lens-shaped slices of B.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .geometry import Ball, GeometryError, ShellSource, as_point
from .potentials import M_coeff, QuadratureError, scaled_dsinhc


@dataclass(frozen=True)
class ElasticParams:
    rho: float
    mu: float
    lam: float
    m: float
    c: float = 1.0
    k: float = 1.0
    theta0: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("shear modulus mu must be positive")
        if not 3 * self.lam + 2 * self.mu > 0:
            raise ValueError("need 3 lambda + 2 mu > 0")
        if self.m == 0:
            raise ValueError("stress-temperature modulus m must be nonzero")
        for name in ("rho", "c", "k", "theta0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def slowness(self) -> float:
        """sqrt(rho/mu), the inverse shear-wave speed."""
        return math.sqrt(self.rho / self.mu)


def _unit(v, name="vector") -> np.ndarray:
    v = as_point(v)
    n = np.linalg.norm(v)
    if abs(n - 1.0) > 1e-12:
        raise ValueError(f"{name} must have unit length, got |{name}| = {n}")
    return v


@dataclass(frozen=True)
class ShellElasticSource:
    shell: ShellSource
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _unit(self.a, "a"))


def _complete_frame(nu: np.ndarray):
    """Unit vectors b, c with b . c = 0 and b x c = nu."""
    helper = np.eye(3)[np.argmin(np.abs(nu))]
    b = np.cross(helper, nu)
    b /= np.linalg.norm(b)
    c = np.cross(nu, b)
    return b, c


@dataclass(frozen=True)
class TouchingBallGeom:
    """Ball B of radius delta inside D touching its boundary at the farthest point q from p.

    The lens slices use radii r in (R_D - delta_prime, R_D).
    """

    p: np.ndarray
    q: np.ndarray
    delta: float
    delta_prime: float
    b: np.ndarray = None
    c: np.ndarray = None

    def __post_init__(self):
        p, q = as_point(self.p), as_point(self.q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        r_d = np.linalg.norm(q - p)
        if not r_d > 0:
            raise GeometryError("contact point must differ from p")
        if not 0 < self.delta_prime < self.delta:
            raise GeometryError(f"need 0 < delta' < delta, got delta={self.delta}, delta'={self.delta_prime}")
        if not self.delta < r_d:
            raise GeometryError("p must lie outside the touching ball (delta < R_D)")
        nu = (q - p) / r_d
        if self.b is None or self.c is None:
            b, c = _complete_frame(nu)
        else:
            b, c = _unit(self.b, "b"), _unit(self.c, "c")
            if abs(b @ c) > 1e-12 or np.linalg.norm(np.cross(b, c) - nu) > 1e-12:
                raise GeometryError("b, c must be orthonormal with b x c = nu_q")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def r_d(self) -> float:
        return float(np.linalg.norm(self.q - self.p))

    @property
    def nu_q(self) -> np.ndarray:
        return (self.q - self.p) / self.r_d

    @property
    def centre(self) -> np.ndarray:
        return self.q - self.delta * self.nu_q

    @classmethod
    def for_ball(cls, p, ball: Ball, delta: float | None = None, delta_prime: float | None = None):
        """Touching ball for a ball inclusion; defaults delta = radius/2, delta' = delta/2."""
        p = as_point(p)
        d = ball.center - p
        dist = np.linalg.norm(d)
        nu = d / dist if dist > 0 else np.array([0.0, 0.0, 1.0])
        q = ball.center + ball.radius * nu
        delta = ball.radius / 2 if delta is None else delta
        if delta > ball.radius:
            raise GeometryError("touching ball must fit inside the inclusion (delta <= radius)")
        delta_prime = delta / 2 if delta_prime is None else delta_prime
        return cls(p, q, delta, delta_prime)


# ---------------------------------------------------------------------------
# source and profile


def _psi(r, shell):
    on = (r > shell.r1) & (r < shell.r2)
    return np.where(on, (shell.r1 - r) ** 2 * (shell.r2 - r) ** 2, 0.0)


def _dpsi(r, shell):
    on = (r > shell.r1) & (r < shell.r2)
    d = 2 * (r - shell.r1) * (r - shell.r2) * (2 * r - shell.r1 - shell.r2)
    return np.where(on, d, 0.0)


def elastic_initial_velocity(x, src: ShellElasticSource):
    """Initial potential velocity psi(r) a and the velocity datum curl(psi a) = grad psi x a.

    Both vanish outside the open shell and to second order at its spheres.
    Returns ``(datum, curl)`` with shape (..., 3) each.
    """
    x = np.asarray(x, dtype=float)
    d = x - src.shell.p
    r = np.linalg.norm(d, axis=-1)
    datum = _psi(r, src.shell)[..., None] * src.a
    unit = d / np.where(r > 0, r, 1.0)[..., None]
    curl = np.cross(_dpsi(r, src.shell)[..., None] * unit, src.a)
    return datum, curl


def ws0_closed(x, tau: float, src: ShellElasticSource, params: ElasticParams):
    """Closed-form profile (rho/mu) M(sigma) e^{-sigma R1} grad(sinh(sigma r)/r) x a, sigma = tau sqrt(rho/mu)."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x = np.asarray(x, dtype=float)
    shell = src.shell
    d = x - shell.p
    r = np.linalg.norm(d, axis=-1)
    if np.any(r >= shell.r1):
        raise GeometryError("ws0_closed is defined inside B_R1(p) only")
    sigma = tau * params.slowness
    coef = params.rho / params.mu * M_coeff(sigma, shell.r1, shell.r2)
    radial = coef * np.asarray(scaled_dsinhc(r, sigma, shell.r1))
    unit = d / np.where(r > 0, r, 1.0)[..., None]
    return np.cross(radial[..., None] * unit, src.a)


# ---------------------------------------------------------------------------
# lens geometry


def cos_theta(r, R_D: float, delta: float, tol: float = 1e-12):
    """Cosine of the opening angle of the slice {|x - p| = r} inside the touching ball."""
    r = np.asarray(r, dtype=float)
    val = (r * r + (R_D - delta) ** 2 - delta**2) / (2 * r * (R_D - delta))
    if np.any(val > 1 + tol) or np.any(val < -1 - tol):
        raise GeometryError("radius outside the lens: cos(theta) leaves [-1, 1]")
    out = np.clip(val, -1.0, 1.0)
    return out if out.ndim else float(out)


def lens_inner_integrals(r, cos_t):
    """Closed forms of int_0^{r sin t} s sqrt(r^2 - s^2) ds and int_0^{r sin t} s^3 / sqrt(r^2 - s^2) ds."""
    r = np.asarray(r, dtype=float)
    c = np.asarray(cos_t, dtype=float)
    one_m = 1.0 - c
    first = r**3 / 3.0 * (1.0 - c**3)
    # (1 - c) - (1 - c^3)/3 = (1 - c)^2 (2 + c) / 3, free of cancellation near c = 1
    second = r**3 * one_m**2 * (2.0 + c) / 3.0
    return first, second


def cross_weights(nu, b, c, a):
    """|nu x a|^2 and |b x a|^2 + |c x a|^2 for the orthonormal frame (b, c, nu)."""
    a = np.asarray(a, dtype=float)
    w_nu = float(np.sum(np.cross(nu, a) ** 2))
    w_bc = float(np.sum(np.cross(b, a) ** 2) + np.sum(np.cross(c, a) ** 2))
    return w_nu, w_bc


def lens_integral(weight: Callable, geom: TouchingBallGeom, a, r_lo: float, r_hi: float | None = None,
                  epsrel: float = 1e-11) -> float:
    """int over {x in B : r_lo < |x - p| < r_hi} of weight(|x - p|) |(x - p)/|x - p| x a|^2 dx.

    The angular integrals over each slice are done in closed form, leaving
    2 pi int (r^2/3)(1 - cos^3) W |nu x a|^2 dr
    + pi int r^2 [(1 - cos) - (1 - cos^3)/3] W (|b x a|^2 + |c x a|^2) dr.
    """
    a = _unit(a, "a")
    R_D, delta = geom.r_d, geom.delta
    r_hi = R_D if r_hi is None else r_hi
    if not R_D - 2 * delta <= r_lo < r_hi <= R_D:
        raise GeometryError("radial range must lie within the touching ball")
    w_nu, w_bc = cross_weights(geom.nu_q, geom.b, geom.c, a)

    def integrand(r):
        first, second = lens_inner_integrals(r, cos_theta(r, R_D, delta))
        return (2 * np.pi * w_nu * first + np.pi * w_bc * second) / r * weight(r)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info = integrate.quad(integrand, r_lo, r_hi, epsabs=0.0, epsrel=epsrel, limit=400,
                                        full_output=True)[:3]
    if err > 100 * epsrel * abs(val) and err > 1e-300:
        raise QuadratureError(f"lens quadrature did not converge: value {val:.6g}, error {err:.3g}")
    return float(val)


def lens_growth_integral(tau: float, geom: TouchingBallGeom, a, scaled: bool = False) -> float:
    """int over B minus B_{R_D - delta'}(p) of e^{2 tau |x-p|} |(x-p)/|x-p| x a|^2 dx.

    With ``scaled`` the factor e^{-2 tau R_D} is applied inside the integral,
    which keeps large tau finite.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    R_D = geom.r_d
    val = lens_integral(lambda r: np.exp(2 * tau * (r - R_D)), geom, a, R_D - geom.delta_prime)
    return val if scaled else val * math.exp(2 * tau * R_D)


# ---------------------------------------------------------------------------
# fits and the rate check


@dataclass(frozen=True)
class GrowthFit:
    """log F(tau) ~ intercept + rate tau + log_coefficient log tau."""

    rate: float
    intercept: float
    log_coefficient: float | None
    residual: float


def growth_fit(taus, log_values, log_term: bool = True) -> GrowthFit:
    taus = np.asarray(taus, dtype=float)
    y = np.asarray(log_values, dtype=float)
    if taus.size < (4 if log_term else 3):
        raise ValueError("need at least 4 points for the growth fit")
    cols = [np.ones_like(taus), taus] + ([np.log(taus)] if log_term else [])
    X = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = float(np.sqrt(np.mean((y - X @ coef) ** 2)))
    return GrowthFit(float(coef[1]), float(coef[0]), float(coef[2]) if log_term else None, res)


def alpha_hat(taus, scaled_values) -> float:
    """Algebraic exponent alpha from log(e^{-2 tau R_D} I) ~ const - alpha log tau."""
    taus = np.asarray(taus, dtype=float)
    X = np.stack([np.ones_like(taus), -np.log(taus)], axis=1)
    coef, *_ = np.linalg.lstsq(X, np.log(np.asarray(scaled_values, dtype=float)), rcond=None)
    return float(coef[1])


@dataclass
class RateCheck:
    taus: np.ndarray
    log_S: np.ndarray
    rate: float
    target: float
    log_coefficient: float
    residual: float
    dichotomy: dict = field(default_factory=dict)  # T -> "decays" / "grows"

    @property
    def rel_error(self) -> float:
        return abs(self.rate - self.target) / abs(self.target)


def default_rate_taus(params: ElasticParams, R1: float, R_D: float, count: int = 12,
                      span: Sequence[float] = (20.0, 100.0)) -> np.ndarray:
    """taus with tau sqrt(rho/mu) (R1 - R_D) log-spaced over ``span``."""
    scale = params.slowness * (R1 - R_D)
    return np.geomspace(span[0] / scale, span[1] / scale, count)


def log_norm_surrogate(tau: float, params: ElasticParams, shell: ShellSource, geom: TouchingBallGeom, a) -> float:
    """log of S(tau) = rho tau^2 ||ws0||^2 over the whole touching ball B."""
    sigma = tau * params.slowness
    coef = params.rho / params.mu * M_coeff(sigma, shell.r1, shell.r2)
    R1 = shell.r1
    # |ws0|^2 = coef^2 (e^{-sigma R1} d_r sinhc)^2 |unit x a|^2; factor out its size at R_D
    ref = float(scaled_dsinhc(geom.r_d, sigma, R1)) ** 2
    val = lens_integral(lambda r: np.asarray(scaled_dsinhc(r, sigma, R1)) ** 2 / ref, geom, a,
                        max(geom.r_d - 2 * geom.delta, 0.0))
    return math.log(params.rho) + 2 * math.log(tau) + 2 * math.log(abs(coef)) + math.log(ref) + math.log(val)


def elastic_rate_check(params: ElasticParams, R1: float, R2: float, R_D: float, taus=None,
                         geom: TouchingBallGeom | None = None, a=None, T_values: Sequence[float] = (),
                         log_term: bool = True) -> RateCheck:
    """Fit (1/tau) log S(tau) and compare with -2 sqrt(rho/mu) (R1 - R_D).

    S(tau) = rho tau^2 ||ws0||^2_{L2(B)} over the touching ball (by default of
    the concentric ball inclusion B_{R_D}(p), p = 0, delta = R_D/2, with a
    perpendicular to nu_q).  The fit includes a log tau column for the
    unquantified algebraic factor.  For each T in ``T_values`` the sign of the
    fitted rate of e^{tau T} S decides "grows" or "decays".
    """
    if not 0 < R_D < R1 < R2:
        raise ValueError("need 0 < R_D < R1 < R2")
    shell = ShellSource([0.0, 0.0, 0.0], R1, R2) if geom is None else ShellSource(geom.p, R1, R2)
    if geom is None:
        geom = TouchingBallGeom.for_ball(shell.p, Ball(shell.p, R_D))
    if abs(geom.r_d - R_D) > 1e-12 * R_D:
        raise GeometryError("touching ball does not reach R_D")
    a = geom.b if a is None else _unit(a, "a")
    taus = default_rate_taus(params, R1, R_D) if taus is None else np.asarray(taus, dtype=float)
    log_S = np.array([log_norm_surrogate(t, params, shell, geom, a) for t in taus])
    fit = growth_fit(taus, log_S, log_term)
    target = -2.0 * params.slowness * (R1 - R_D)
    dichotomy = {float(T): ("grows" if fit.rate + T > 0 else "decays") for T in T_values}
    return RateCheck(taus, log_S, fit.rate, target, fit.log_coefficient if log_term else 0.0, fit.residual, dichotomy)


# operation names of the external interface
lemma43_integral = lens_growth_integral
theorem41_rate_check = elastic_rate_check
