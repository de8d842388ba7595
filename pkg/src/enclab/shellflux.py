"""Free-space heat evolution of the shell datum, the boundary flux it induces,
and time-Laplace transforms of boundary samples.

The initial temperature is (R2 - r)(R1 - r) on R1 <= r <= R2 (r = |x - p|),
zero elsewhere; it is negative on the shell.  The solution uses the standard
kernel (4 pi t)^{-3/2} exp(-|x-y|^2/4t), reduced to one radial integral

    v(r, t) = (4 pi t)^{-1/2} r^{-1} int_{R1}^{R2} rho psi(rho)
              [exp(-(r-rho)^2/4t) - exp(-(r+rho)^2/4t)] d rho,

which is evaluated in closed form (polynomial times Gaussian).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from scipy.special import erfcx

from .geometry import BoundaryMesh, ShellSource, validate_shell

EARLY_TIME = 1e-8


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.n_steps < 2:
            raise ValueError("n_steps must be at least 2")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    @property
    def dt(self) -> float:
        return self.T / self.n_steps


@dataclass
class FluxRecord:
    """Prescribed flux f(x_i, t_k); ``values`` has shape (n_nodes, n_times)."""

    mesh: BoundaryMesh
    times: np.ndarray
    values: np.ndarray


@dataclass
class BoundarySeries:
    """Boundary temperature samples; same layout as :class:`FluxRecord`."""

    mesh: BoundaryMesh
    times: np.ndarray
    values: np.ndarray


def _shell_poly(shell: ShellSource, extra_power: int = 1) -> np.ndarray:
    """Coefficients (ascending) of rho^extra_power * (R2 - rho)(R1 - rho)."""
    base = np.polynomial.polynomial.polymul([shell.r2, -1.0], [shell.r1, -1.0])
    return np.concatenate([np.zeros(extra_power), base])


def _shift_poly(coef, c, sigma):
    """Coefficients in z of P(c + sigma z) for broadcast arrays c, sigma.

    Returns an array of shape (deg+1,) + broadcast shape.
    """
    deg = len(coef) - 1
    c = np.asarray(c, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    shape = np.broadcast(c, sigma).shape
    out = np.zeros((deg + 1,) + shape)
    for k in range(deg + 1):
        acc = np.zeros(shape)
        for m in range(k, deg + 1):
            acc = acc + coef[m] * comb(m, k) * c ** (m - k)
        out[k] = acc * sigma**k
    return out


def _gauss_moments(za, zb, kmax):
    """G_k = int_{za}^{zb} z^k exp(-z^2) dz, k = 0..kmax, scaled by exp(m^2).

    ``m`` is the point of [za, zb] closest to the origin; returns (G * exp(m^2), m).
    """
    za = np.asarray(za, dtype=float)
    zb = np.asarray(zb, dtype=float)
    m = np.where(za > 0, za, np.where(zb < 0, zb, 0.0))
    m2 = m * m
    sqpi2 = 0.5 * np.sqrt(np.pi)
    # erf(zb) - erf(za), scaled by exp(m^2); unused branches may overflow
    with np.errstate(over="ignore", invalid="ignore"):
        g0_pos = sqpi2 * (erfcx(za) - erfcx(zb) * np.exp(m2 - zb * zb))
        g0_neg = sqpi2 * (erfcx(-zb) - erfcx(-za) * np.exp(m2 - za * za))
        g0_mid = sqpi2 * (2.0 - erfcx(-za) * np.exp(-za * za) - erfcx(zb) * np.exp(-zb * zb))
    g0 = np.where(za > 0, g0_pos, np.where(zb < 0, g0_neg, g0_mid))
    ea = np.exp(m2 - za * za)
    eb = np.exp(m2 - zb * zb)
    G = [g0, 0.5 * (ea - eb)]
    for k in range(2, kmax + 1):
        G.append(0.5 * (za ** (k - 1) * ea - zb ** (k - 1) * eb) + 0.5 * (k - 1) * G[k - 2])
    return np.array(G[: kmax + 1]), m


def _gauss_poly_integral(coef, a, b, c, sigma, times_z=False):
    """int_a^b P(rho) exp(-(rho - c)^2/sigma^2) d rho (optionally with factor (rho - c)/sigma)."""
    q = _shift_poly(coef, c, sigma)
    if times_z:
        q = np.concatenate([np.zeros((1,) + q.shape[1:]), q])
    za = (a - c) / sigma
    zb = (b - c) / sigma
    G, m = _gauss_moments(za, zb, q.shape[0] - 1)
    return sigma * np.exp(-m * m) * np.sum(q * G, axis=0)


def _radial_parts(r, t, shell):
    """F(r) = r v(r, t) and dF/dr for t > 0, r > 0."""
    sigma = 2.0 * np.sqrt(t)
    coef = _shell_poly(shell)
    pref = 1.0 / np.sqrt(4.0 * np.pi * t)
    a, b = shell.r1, shell.r2
    F = pref * (_gauss_poly_integral(coef, a, b, r, sigma) - _gauss_poly_integral(coef, a, b, -r, sigma))
    # d/dr exp(-(rho - r)^2/4t) = (2/sigma) z e^{..} with z = (rho - r)/sigma; image term analogous
    dF = pref * (2.0 / sigma) * (
        _gauss_poly_integral(coef, a, b, r, sigma, times_z=True)
        + _gauss_poly_integral(coef, a, b, -r, sigma, times_z=True)
    )
    return F, dF


TAYLOR_TERMS = 14


def _center_taylor(t, shell, n_terms=TAYLOR_TERMS):
    """Even Taylor coefficients [v0, v2, v4, ...] of v(r, t) about r = 0.

    Laplacian^k r^{2k} = (2k+1)! and Laplacian v = dv/dt give
    v_{2k} = d^k v(0, t)/dt^k / (2k+1)!.  With K = (4 pi t)^{-3/2} exp(-rho^2/4t),
    d^k K/dt^k = K sum_m b[k, m] t^{-k-m} rho^{2m}, where
    b[k+1, m] = -(k + m + 3/2) b[k, m] + b[k, m-1]/4.
    """
    sigma = 2.0 * np.sqrt(t)
    coef = _shell_poly(shell, extra_power=2)
    k0 = (4.0 * np.pi * t) ** -1.5 * 4.0 * np.pi
    moments = [
        _gauss_poly_integral(np.concatenate([np.zeros(2 * m), coef]), shell.r1, shell.r2, 0.0, sigma)
        for m in range(n_terms)
    ]
    b = np.zeros(n_terms)
    b[0] = 1.0
    out = []
    for k in range(n_terms):
        val = sum(b[m] * t ** (-k - m) * moments[m] for m in range(k + 1))
        out.append(k0 * val / factorial(2 * k + 1))
        nb = np.zeros(n_terms)
        for m in range(k + 2 if k + 2 <= n_terms else n_terms):
            nb[m] = -(k + m + 1.5) * b[m] + (0.25 * b[m - 1] if m > 0 else 0.0)
        b = nb
    return out


def initial_datum(r, shell: ShellSource):
    r = np.asarray(r, dtype=float)
    inside = (r >= shell.r1) & (r <= shell.r2)
    return np.where(inside, (shell.r2 - r) * (shell.r1 - r), 0.0)


def _initial_slope(r, shell):
    r = np.asarray(r, dtype=float)
    inside = (r > shell.r1) & (r < shell.r2)
    return np.where(inside, 2.0 * r - shell.r1 - shell.r2, 0.0)


def shell_heat_value(r, t, shell: ShellSource):
    """Free-space temperature v(r, t) and its radial derivative, r = |x - p|.

    Broadcasts over ``r`` and ``t``.  Returns ``(v, dv_dr)``.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    r, t = np.broadcast_arrays(r, t)
    shape = r.shape
    r, t = r.ravel(), t.ravel()
    v = initial_datum(r, shell)
    dv = _initial_slope(r, shell)
    live = t >= EARLY_TIME * (shell.r2 - shell.r1) ** 2
    # near the centre the odd-part subtraction cancels; use the even Taylor series there
    near = live & (r * shell.r2 < t) & (r * r < t)
    far = live & ~near
    if np.any(far):
        rf = r[far]
        F, dF = _radial_parts(rf, t[far], shell)
        v[far] = F / rf
        dv[far] = dF / rf - F / rf**2
    if np.any(near):
        rn = r[near]
        # the series coefficients depend on t only
        t_unique, inverse = np.unique(t[near], return_inverse=True)
        coeffs = [c[inverse] for c in _center_taylor(t_unique, shell)]
        v[near] = sum(c * rn ** (2 * k) for k, c in enumerate(coeffs))
        dv[near] = sum(2 * k * c * rn ** (2 * k - 1) for k, c in enumerate(coeffs) if k > 0)
    v, dv = v.reshape(shape), dv.reshape(shape)
    if v.ndim == 0:
        return float(v), float(dv)
    return v, dv


def shell_heat_gradient(x, t, shell: ShellSource):
    """Cartesian gradient of v at points ``x`` (shape (..., 3)) and times ``t``."""
    x = np.asarray(x, dtype=float)
    d = x - shell.p
    r = np.linalg.norm(d, axis=-1)
    _, dv = shell_heat_value(r, t, shell)
    unit = d / np.where(r > 0, r, 1.0)[..., None]
    return np.asarray(dv)[..., None] * unit


def _blocked_values(r, times, shell, max_size=2_000_000):
    """v and d_r v on the (node, time) product, evaluated in blocks of time columns."""
    v = np.empty((r.size, times.size))
    dv = np.empty_like(v)
    step = max(1, max_size // max(r.size, 1))
    for a in range(0, times.size, step):
        b = min(a + step, times.size)
        v[:, a:b], dv[:, a:b] = shell_heat_value(r[:, None], times[None, a:b], shell)
    return v, dv


def flux_on_boundary(mesh: BoundaryMesh, grid: TimeGrid, shell: ShellSource, body=None) -> FluxRecord:
    """Prescribed flux f(x_i, t_k) = grad v(x_i, t_k) . nu(x_i).

    If ``body`` is given the shell containment is validated first.
    """
    if body is not None:
        validate_shell(body, shell)
    times = grid.times
    d = mesh.points - shell.p
    r = np.linalg.norm(d, axis=1)
    if np.any(r >= shell.r1):
        raise ValueError("boundary nodes must lie inside B_R1(p)")
    align = np.einsum("ij,ij->i", d, mesh.normals) / np.where(r > 0, r, 1.0)
    _, dv = _blocked_values(r, times, shell)
    return FluxRecord(mesh, times, dv * align[:, None])


def heat_on_boundary(mesh: BoundaryMesh, grid: TimeGrid, shell: ShellSource) -> BoundarySeries:
    """Samples of v itself on the boundary nodes (the data behind w0)."""
    r = np.linalg.norm(mesh.points - shell.p, axis=1)
    v, _ = _blocked_values(r, grid.times, shell)
    return BoundarySeries(mesh, grid.times, v)


def laplace_weights(times, tau: float) -> np.ndarray:
    """Composite-trapezoid weights of int_0^T exp(-tau t) g(t) dt on ``times``."""
    times = np.asarray(times, dtype=float)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if times.size < 2:
        raise ValueError("need at least two time samples")
    dt = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w * np.exp(-tau * times)


def laplace_boundary(series, tau: float, times=None) -> np.ndarray:
    """Truncated Laplace transform int_0^T exp(-tau t) value(x_i, t) dt per node.

    ``series`` is a :class:`FluxRecord`, :class:`BoundarySeries` or a raw
    array of shape (n_nodes, n_times) together with ``times``.
    """
    if isinstance(series, (FluxRecord, BoundarySeries)):
        values, times = series.values, series.times
    else:
        values = np.asarray(series, dtype=float)
    if values.size == 0:
        raise ValueError("empty series")
    return values @ laplace_weights(times, tau)
