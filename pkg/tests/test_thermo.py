import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enclab.geometry import Ball, GeometryError, ShellSource
from enclab.thermo import (
    ElasticParams,
    ShellElasticSource,
    TouchingBallGeom,
    alpha_hat,
    cos_theta,
    cross_weights,
    elastic_initial_velocity,
    growth_fit,
    lens_growth_integral,
    lens_inner_integrals,
    lens_integral,
    elastic_rate_check,
    ws0_closed,
)

UNIT = ElasticParams(1.0, 1.0, 1.0, 1.0)


def _source(a=(0.0, 0.0, 1.0), p=(0.0, 0.0, 0.0), r1=1.0, r2=2.0):
    a = np.asarray(a, dtype=float)
    return ShellElasticSource(ShellSource(p, r1, r2), a / np.linalg.norm(a))


def _curl(f, x, h):
    J = np.empty((3, 3))  # J[i, j] = d f_i / d x_j
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        J[:, j] = (f(x + e) - f(x - e)) / (2 * h)
    return np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]]), np.trace(J)


def _laplacian(f, x, h):
    out = -6 * f(x)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        out = out + f(x + e) + f(x - e)
    return out / h**2


def test_params_validation():
    assert UNIT.slowness == 1.0
    assert ElasticParams(4.0, 1.0, 0.0, 1.0).slowness == 2.0
    for bad in [dict(mu=0.0), dict(lam=-1.0), dict(m=0.0), dict(rho=-1.0), dict(theta0=0.0)]:
        kw = dict(rho=1.0, mu=1.0, lam=1.0, m=1.0) | bad
        with pytest.raises(ValueError):
            ElasticParams(**kw)
    with pytest.raises(ValueError, match="unit length"):
        ShellElasticSource(ShellSource([0, 0, 0], 1.0, 2.0), np.array([1.0, 1.0, 0.0]))


def test_initial_velocity_vanishes_on_shell_spheres():
    src = _source(a=(1, 2, 2), p=(0.1, -0.2, 0.3))
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(20, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for R in (1.0, 2.0):
        datum, curl = elastic_initial_velocity(src.shell.p + R * dirs, src)
        np.testing.assert_allclose(datum, 0.0, atol=1e-14)
        np.testing.assert_allclose(curl, 0.0, atol=1e-12)
    # off the shell both are zero, inside it the datum points along a
    datum, curl = elastic_initial_velocity(src.shell.p + 0.5 * dirs, src)
    assert np.all(datum == 0) and np.all(curl == 0)
    datum, _ = elastic_initial_velocity(src.shell.p + 1.5 * dirs, src)
    np.testing.assert_allclose(datum, 0.25**2 * src.a[None, :] * np.ones((20, 1)), rtol=1e-14)


def test_curl_datum_is_gradient_cross_a():
    src = _source(a=(0.3, -0.4, 0.5))
    psi = lambda x: elastic_initial_velocity(x, src)[0]
    x = np.array([0.7, 0.9, -0.6])
    assert 1.0 < np.linalg.norm(x) < 2.0
    fd, _ = _curl(psi, x, 1e-5)
    np.testing.assert_allclose(elastic_initial_velocity(x, src)[1], fd, rtol=1e-8)


def test_curl_datum_divergence_free():
    src = _source(a=(1, -1, 0.5))
    field = lambda x: elastic_initial_velocity(x, src)[1]
    rng = np.random.default_rng(1)
    for _ in range(10):
        d = rng.normal(size=3)
        x = d / np.linalg.norm(d) * rng.uniform(1.1, 1.9)
        divs = [abs(_curl(field, x, h)[1]) for h in (1e-2, 5e-3)]
        # O(h^2): halving h quarters the error (up to roundoff)
        assert divs[1] < 0.3 * divs[0] + 1e-9
        assert divs[1] < 1e-4


def test_curl_datum_perpendicular_structure():
    a = np.array([0.0, 0.6, 0.8])
    src = _source(a=a)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(30, 3))
    x *= (rng.uniform(1.05, 1.95, size=30) / np.linalg.norm(x, axis=1))[:, None]
    _, curl = elastic_initial_velocity(x, src)
    np.testing.assert_allclose(curl @ a, 0.0, atol=1e-14)
    np.testing.assert_allclose(np.sum(curl * x, axis=1), 0.0, atol=1e-14)
    # along a the curl vanishes identically
    _, c_axis = elastic_initial_velocity(1.5 * a, src)
    np.testing.assert_allclose(c_axis, 0.0, atol=1e-14)


def _ws0_oracle(x, tau, src, params, n=160):
    """(rho/mu) grad Phi x a with Phi the modified-Helmholtz Newtonian potential of psi.

    Direct 2D Gauss-Legendre quadrature over the shell in (radius, cos angle)
    with the gradient taken under the integral sign.
    """
    sigma = tau * params.slowness
    r1, r2 = src.shell.r1, src.shell.r2
    d = np.asarray(x, float) - src.shell.p
    r = np.linalg.norm(d)
    gx, gw = np.polynomial.legendre.leggauss(n)
    rho = 0.5 * (r2 - r1) * gx + 0.5 * (r1 + r2)
    wr = 0.5 * (r2 - r1) * gw
    mu = gx
    R, MU = np.meshgrid(rho, mu, indexing="ij")
    W = np.outer(wr, gw)
    dist = np.sqrt(r * r + R * R - 2 * r * R * MU)
    psi = (r1 - R) ** 2 * (r2 - R) ** 2
    # d/dr of e^{-sigma dist}/(4 pi dist), dist depends on r through r - R mu
    kern = -(sigma * dist + 1) * np.exp(-sigma * dist) / (4 * np.pi * dist**3) * (r - R * MU)
    dphi = np.sum(W * 2 * np.pi * R**2 * psi * kern)
    return params.rho / params.mu * np.cross(dphi * d / r, src.a)


@pytest.mark.parametrize("tau", [0.5, 3.0, 10.0])
def test_ws0_matches_potential_quadrature(tau):
    params = ElasticParams(2.0, 0.5, 1.0, 1.0)
    src = _source(a=(1, 2, -2), p=(0.2, 0.0, -0.1))
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = rng.normal(size=3)
        x = src.shell.p + d / np.linalg.norm(d) * rng.uniform(0.05, 0.9)
        ref = _ws0_oracle(x, tau, src, params)
        got = ws0_closed(x, tau, src, params)
        np.testing.assert_allclose(got, ref, rtol=1e-6, atol=1e-6 * np.linalg.norm(ref))


def test_ws0_domain_errors():
    src = _source()
    with pytest.raises(GeometryError):
        ws0_closed([0.0, 0.0, 1.0], 1.0, src, UNIT)
    with pytest.raises(ValueError):
        ws0_closed([0.0, 0.0, 0.5], 0.0, src, UNIT)
    # vectorized and zero at p
    out = ws0_closed(np.zeros((4, 3)), 2.0, src, UNIT)
    assert out.shape == (4, 3)
    np.testing.assert_array_equal(out, 0.0)


def test_ws0_solves_homogeneous_equation_and_is_solenoidal():
    params = ElasticParams(1.5, 0.8, 1.0, 1.0)
    tau = 2.0
    src = _source(a=(0.0, 1.0, 0.0))
    f = lambda x: ws0_closed(x, tau, src, params)
    x = np.array([0.3, -0.2, 0.4])
    scale = np.linalg.norm(params.rho * tau**2 * f(x))
    res, div = [], []
    for h in (2e-2, 1e-2):
        res.append(np.linalg.norm(params.mu * _laplacian(f, x, h) - params.rho * tau**2 * f(x)) / scale)
        div.append(abs(_curl(f, x, h)[1]) / np.linalg.norm(f(x)))
    assert res[1] < 1e-4 and res[1] < 0.3 * res[0]
    assert div[1] < 1e-5 and div[1] < 0.3 * div[0]


def test_cos_theta_endpoints_and_bound():
    R_D, delta, dp = 0.6, 0.3, 0.15
    assert cos_theta(R_D, R_D, delta) == pytest.approx(1.0, abs=1e-15)
    assert cos_theta(R_D - dp, R_D, delta) < 1.0
    r = np.linspace(R_D - dp, R_D, 200)
    c_prime = (delta - dp) / (R_D * (R_D - delta))
    assert np.all(1 - cos_theta(r, R_D, delta) >= c_prime * (R_D - r) - 1e-14)
    # the near end of the touching ball is again a single point on the axis
    assert cos_theta(0.2, R_D, 0.2) == pytest.approx(1.0, abs=1e-15)
    assert np.all(cos_theta(np.linspace(0.2, R_D, 50), R_D, 0.2) > 0)
    with pytest.raises(GeometryError):
        cos_theta(R_D + 0.01, R_D, delta)
    with pytest.raises(GeometryError):
        cos_theta(0.15, R_D, 0.2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.0, np.pi / 2))
def test_lens_inner_integrals_match_quadrature(r, theta):
    from scipy.integrate import quad

    top = r * np.sin(theta)
    first, second = lens_inner_integrals(r, np.cos(theta))
    q1 = quad(lambda s: s * np.sqrt(r * r - s * s), 0, top, epsabs=0, epsrel=1e-13)[0]
    # s = r sin(u) removes the endpoint singularity of the second integrand
    q2 = quad(lambda u: r**3 * np.sin(u) ** 3, 0, theta, epsabs=0, epsrel=1e-13)[0]
    np.testing.assert_allclose(first, q1, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(second, q2, rtol=1e-10, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_frame_weights_sum_to_two(nu_raw, a_raw):
    nu, a = np.array(nu_raw), np.array(a_raw)
    if np.linalg.norm(nu) < 1e-3 or np.linalg.norm(a) < 1e-3:
        return
    nu /= np.linalg.norm(nu)
    a /= np.linalg.norm(a)
    geom = TouchingBallGeom(np.zeros(3), 0.6 * nu, 0.3, 0.15)
    np.testing.assert_allclose(geom.b @ geom.c, 0.0, atol=1e-14)
    np.testing.assert_allclose(np.cross(geom.b, geom.c), geom.nu_q, atol=1e-14)
    w_nu, w_bc = cross_weights(geom.nu_q, geom.b, geom.c, a)
    assert w_nu + w_bc == pytest.approx(2.0, abs=1e-12)


def test_touching_ball_validation():
    with pytest.raises(GeometryError):
        TouchingBallGeom([0, 0, 0], [0, 0, 0.6], 0.3, 0.3)
    with pytest.raises(GeometryError):
        TouchingBallGeom([0, 0, 0], [0, 0, 0.6], 0.7, 0.3)
    with pytest.raises(GeometryError):
        TouchingBallGeom([0, 0, 0], [0, 0, 0.6], 0.3, 0.1, b=[1, 0, 0], c=[0, 0, 1])
    g = TouchingBallGeom.for_ball([0.1, 0, 0], Ball([0.3, 0.1, 0.0], 0.35))
    assert g.delta == pytest.approx(0.175) and g.delta_prime == pytest.approx(0.0875)
    assert g.r_d == pytest.approx(np.hypot(0.2, 0.1) + 0.35)
    np.testing.assert_allclose(np.linalg.norm(g.centre - np.array([0.3, 0.1, 0.0])), 0.35 - g.delta)
    with pytest.raises(GeometryError):
        TouchingBallGeom.for_ball([0, 0, 0], Ball([0, 0, 0], 0.5), delta=0.6)


def _lens_oracle(tau, geom, a, n=80, n_phi=64):
    """3D quadrature over B minus the inner ball, in spherical coordinates about the centre of B."""
    A = geom.r_d - geom.delta
    e = geom.delta - geom.delta_prime
    lo = geom.r_d - geom.delta_prime
    gx, gw = np.polynomial.legendre.leggauss(n)
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    total = 0.0
    rhos = 0.5 * (geom.delta - e) * gx + 0.5 * (geom.delta + e)
    for rho, wr in zip(rhos, 0.5 * (geom.delta - e) * gw):
        mu0 = (lo**2 - A**2 - rho**2) / (2 * A * rho)
        mu = 0.5 * (1 - mu0) * gx + 0.5 * (1 + mu0)
        wm = 0.5 * (1 - mu0) * gw
        M, P = np.meshgrid(mu, phi, indexing="ij")
        S = np.sqrt(1 - M**2)
        y = rho * (S[..., None] * (np.cos(P)[..., None] * geom.b + np.sin(P)[..., None] * geom.c)
                   + M[..., None] * geom.nu_q)
        x = A * geom.nu_q + y
        dist = np.linalg.norm(x, axis=-1)
        cr = np.sum(np.cross(x / dist[..., None], a) ** 2, axis=-1)
        f = np.exp(2 * tau * (dist - geom.r_d)) * cr
        total += wr * rho**2 * np.sum(wm[:, None] * f) * 2 * np.pi / n_phi
    return total


@pytest.mark.parametrize("a", [(1.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.6, 0.0, 0.8), (0.48, 0.6, 0.64)])
def test_lens_integral_matches_3d_quadrature(a):
    geom = TouchingBallGeom([0, 0, 0], [0, 0, 0.6], 0.3, 0.15)
    a = np.asarray(a)
    tau = 10 / 0.6
    ref = _lens_oracle(tau, geom, a)
    np.testing.assert_allclose(lens_growth_integral(tau, geom, a, scaled=True), ref, rtol=1e-4)
    np.testing.assert_allclose(lens_growth_integral(tau, geom, a), ref * np.exp(2 * tau * 0.6), rtol=1e-4)


def test_lens_integral_volume():
    # weight 1 summed over both frame weights (w_nu + w_bc = 2 averaged by symmetry) gives the ball volume
    geom = TouchingBallGeom([0, 0, 0], [0, 0, 1.0], 0.4, 0.2)
    vols = [lens_integral(lambda r: np.ones_like(r), geom, a, geom.r_d - 2 * geom.delta)
            for a in np.eye(3)]
    # sum over a = e1, e2, e3 of |u x a|^2 is 2 for any unit u
    assert sum(vols) == pytest.approx(2 * 4 / 3 * np.pi * 0.4**3, rel=1e-10)
    with pytest.raises(GeometryError):
        lens_integral(lambda r: 1.0, geom, np.eye(3)[0], 0.1)


def test_lens_integral_scaling():
    geom = TouchingBallGeom([0, 0, 0], [0, 0.6, 0], 0.3, 0.15)
    a = np.array([1.0, 0.0, 0.0])
    tau = 20.0
    base = lens_growth_integral(tau, geom, a)
    for lam in (0.5, 2.0, 3.7):
        g2 = TouchingBallGeom(geom.p * lam, geom.q * lam, geom.delta * lam, geom.delta_prime * lam)
        # the frame may differ but a stays perpendicular to nu_q, and the integral only sees |.x a|
        np.testing.assert_allclose(lens_growth_integral(tau / lam, g2, a), lam**3 * base, rtol=1e-9)


def test_lens_integral_errors():
    geom = TouchingBallGeom([0, 0, 0], [0, 0, 0.6], 0.3, 0.15)
    with pytest.raises(ValueError):
        lens_growth_integral(0.0, geom, [1, 0, 0])
    with pytest.raises(ValueError):
        lens_growth_integral(1.0, geom, [1, 1, 0])


def _exponent_sweep(a, geom, lo=50, hi=200, n=12):
    taus = np.geomspace(lo, hi, n) / geom.r_d
    scaled = np.array([lens_growth_integral(t, geom, a, scaled=True) for t in taus])
    return taus, scaled


def test_lens_exponent_perpendicular():
    geom = TouchingBallGeom.for_ball([0, 0, 0], Ball([0, 0, 0], 0.6))
    taus, scaled = _exponent_sweep(geom.b, geom)
    log_i = np.log(scaled) + 2 * taus * geom.r_d
    fit = growth_fit(taus, log_i)
    assert abs(fit.rate / (2 * geom.r_d) - 1) < 0.01
    # tau^2 e^{-2 tau R_D} I stays bounded away from zero
    assert np.min(taus**2 * scaled) > 0.5 * np.max(taus**2 * scaled)


def test_lens_integral_parallel_extra_decay():
    geom = TouchingBallGeom.for_ball([0, 0, 0], Ball([0, 0, 0], 0.6))
    taus, perp = _exponent_sweep(geom.b, geom)
    _, par = _exponent_sweep(geom.nu_q, geom)
    v = taus**3 * par
    assert np.min(v) > 0.8 * np.max(v)
    diff = alpha_hat(taus, par) - alpha_hat(taus, perp)
    assert abs(diff - 1.0) <= 0.2


def test_lens_exponent_ordering():
    geom = TouchingBallGeom.for_ball([0, 0, 0], Ball([0, 0, 0], 0.6))
    rates = []
    for lo, hi in ((10, 40), (40, 160), (160, 640)):
        taus, scaled = _exponent_sweep(geom.b, geom, lo, hi)
        rates.append(growth_fit(taus, np.log(scaled) + 2 * taus * geom.r_d, log_term=False).rate)
    rates = np.array(rates)
    assert np.all(rates < 2 * geom.r_d)
    assert np.all(np.diff(rates) > 0)


@pytest.mark.parametrize("delta", [0.3, 0.2])
def test_lens_exponent_independent_of_delta(delta):
    geom = TouchingBallGeom.for_ball([0, 0, 0], Ball([0, 0, 0], 0.6), delta=delta)
    taus, scaled = _exponent_sweep(geom.b, geom)
    fit = growth_fit(taus, np.log(scaled) + 2 * taus * geom.r_d)
    assert abs(fit.rate / (2 * geom.r_d) - 1) < 0.01


def test_growth_fit_recovers_synthetic():
    taus = np.geomspace(10, 100, 10)
    fit = growth_fit(taus, 1.5 - 0.7 * taus - 2.0 * np.log(taus))
    assert fit.rate == pytest.approx(-0.7, abs=1e-10)
    assert fit.log_coefficient == pytest.approx(-2.0, abs=1e-9)
    assert alpha_hat(taus, taus**-2.5) == pytest.approx(2.5, abs=1e-12)
    with pytest.raises(ValueError):
        growth_fit(taus[:3], taus[:3])


def test_rate_check_unit_params():
    rc = elastic_rate_check(UNIT, 1.0, 2.0, 0.6, T_values=(0.7, 1.0))
    assert rc.target == pytest.approx(-0.8)
    assert rc.rel_error < 0.02
    assert rc.dichotomy == {0.7: "decays", 1.0: "grows"}
    assert np.all(np.isfinite(rc.log_S))


def test_rate_check_scales_with_slowness():
    params = ElasticParams(4.0, 1.0, 1.0, 1.0)
    rc = elastic_rate_check(params, 1.0, 2.0, 0.6)
    assert rc.target == pytest.approx(-1.6)
    assert rc.rel_error < 0.02


def test_rate_check_errors():
    with pytest.raises(ValueError):
        elastic_rate_check(UNIT, 1.0, 2.0, 1.2)
    geom = TouchingBallGeom([0, 0, 0], [0, 0, 0.5], 0.2, 0.1)
    with pytest.raises(GeometryError):
        elastic_rate_check(UNIT, 1.0, 2.0, 0.6, geom=geom)


def test_interface_aliases():
    from enclab import thermo

    assert thermo.lemma43_integral is thermo.lens_growth_integral
    assert thermo.theorem41_rate_check is thermo.elastic_rate_check
