"""Self-checks of the closed forms against independent quadratures.

Each check returns an :class:`OracleResult`; :func:`run_oracles` runs the
whole suite with a fixed seed so that reports are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .geometry import ShellSource
from .potentials import M_coeff, coefficient_ABC, profile_H, vj_chain, vj_quadrature, w00_closed, w00_quadrature
from .shellflux import shell_heat_value


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    max_error: float
    tolerance: float
    n_cases: int
    detail: str = ""


def _result(name, errors, tol, detail=""):
    errors = np.atleast_1d(np.asarray(errors, dtype=float))
    worst = float(np.max(errors)) if errors.size else 0.0
    return OracleResult(name, bool(np.all(errors <= tol)), worst, tol, int(errors.size), detail)


def recurrence_cases(rng, n: int = 100) -> list:
    """Rows (j, eta, s, r, recurrence, quadrature, rel_err) at random j <= 6, eta, s, r/eta."""
    rows = []
    for _ in range(n):
        j = int(rng.integers(1, 7))
        eta = rng.uniform(0.5, 3.0)
        s = rng.uniform(1.0, 50.0)
        r = eta * rng.uniform(0.1, 0.99)
        ref = vj_quadrature(j, eta, s, r)
        rec = vj_chain(j, eta, s, r)
        rows.append((j, eta, s, r, rec, ref, abs(rec - ref) / abs(ref)))
    return rows


def check_recurrence(rows, tol: float = 1e-8) -> OracleResult:
    """Recurrence-chained v_j against adaptive quadrature."""
    return _result("recurrence_vs_quadrature", [row[-1] for row in rows], tol)


def check_w00(rng, n: int = 50, tol: float = 1e-6) -> OracleResult:
    """Closed-form heat profile against radial quadrature of the shell potential."""
    shell = ShellSource([0.0, 0.0, 0.0], 1.0, 2.0)
    errs = []
    for _ in range(n):
        s = rng.uniform(0.5, 60.0)
        d = rng.normal(size=3)
        r = rng.uniform(0.0, 0.99)
        ref = w00_quadrature(r, s, 1.0, 2.0)
        errs.append(abs(w00_closed(r * d / np.linalg.norm(d), shell, s) - ref) / abs(ref))
    return _result("w00_closed_vs_quadrature", errs, tol)


def check_profile_limit() -> OracleResult:
    """s^3 H(s; 1, 2) -> -1: within 5% at s = 80, 2% at s = 200, error decreasing."""
    e80 = abs(80.0**3 * profile_H(80.0, 1.0, 2.0) + 1.0)
    e200 = abs(200.0**3 * profile_H(200.0, 1.0, 2.0) + 1.0)
    ok = e80 <= 0.05 and e200 <= 0.02 and e200 < e80
    return OracleResult("heat_profile_limit", ok, max(e80 / 0.05, e200 / 0.02), 1.0, 2,
                        f"|s^3 H + 1| = {e80:.3g} (s=80), {e200:.3g} (s=200)")


def check_ABC(rng, n: int = 200, tol: float = 1e-12) -> OracleResult:
    """A = B = 0 and C = 2 R1 (R1 - R2)^2 relative to the size of the terms that cancel."""
    errs = []
    for _ in range(n):
        r1 = rng.uniform(0.01, 10.0)
        r2 = r1 + rng.uniform(0.01, 10.0)
        A, B, C = coefficient_ABC(r1, r2)
        scale = (r1 * r2) ** 2 * r1 + (r1 + r2) ** 2 * r1**3 + r1**5
        errs += [abs(A) / scale, abs(B) / scale, abs(C - 2 * r1 * (r1 - r2) ** 2) / scale]
    return _result("ABC_identities", errs, tol)


def check_elastic_limit() -> OracleResult:
    """s^4 M(s; 1, 2) -> 2 within 3% at s = 200."""
    err = abs(200.0**4 * M_coeff(200.0, 1.0, 2.0) - 2.0) / 2.0
    return _result("elastic_profile_limit", [err], 0.03)


def _kernel_value(r, t, shell):
    """Heat-kernel convolution of the shell datum, reduced to one radial integral."""
    def f(rho):
        psi = (shell.r2 - rho) * (shell.r1 - rho)
        if r == 0.0:
            return psi * rho * rho * 2 * np.exp(-rho * rho / (4 * t)) / np.sqrt(4 * np.pi * t) / t
        g = np.exp(-(r - rho) ** 2 / (4 * t)) - np.exp(-(r + rho) ** 2 / (4 * t))
        return psi * rho * g / (r * np.sqrt(4 * np.pi * t))

    pts = np.linspace(shell.r1, shell.r2, 9)
    return sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-12)[0] for a, b in zip(pts[:-1], pts[1:]))


def check_shell_heat(rng, n: int = 20, tol: float = 1e-8) -> OracleResult:
    """Free-space shell temperature against heat-kernel quadrature."""
    shell = ShellSource([0.0, 0.0, 0.0], 1.05, 1.55)
    scale = 0.25**2 * 0.25
    errs = []
    for _ in range(n):
        r = rng.uniform(0.0, 3.0)
        t = 10 ** rng.uniform(-2.5, 0.5)
        ref = _kernel_value(r, t, shell)
        v, _ = shell_heat_value(r, t, shell)
        errs.append(abs(v - ref) / max(abs(ref), 1e-5 * scale))
    return _result("shell_heat_vs_kernel", errs, tol)


def check_shell_flux(rng, n: int = 20, tol: float = 1e-6) -> OracleResult:
    """Radial derivative of the shell temperature against a central difference."""
    shell = ShellSource([0.0, 0.0, 0.0], 1.05, 1.55)
    errs = []
    for _ in range(n):
        r = rng.uniform(0.1, 1.0)
        t = 10 ** rng.uniform(-2.0, 0.5)
        h = 1e-5
        fd = (shell_heat_value(r + h, t, shell)[0] - shell_heat_value(r - h, t, shell)[0]) / (2 * h)
        dv = shell_heat_value(r, t, shell)[1]
        errs.append(abs(dv - fd) / max(abs(dv), 1e-8))
    return _result("shell_flux_vs_difference", errs, tol)


def run_oracles(seed: int = 0, n_recurrence: int = 100):
    """All checks with a seeded generator; returns (results, recurrence rows)."""
    rng = np.random.default_rng(seed)
    rows = recurrence_cases(rng, n_recurrence)
    results = [
        check_recurrence(rows),
        check_w00(rng),
        check_profile_limit(),
        check_ABC(rng),
        check_elastic_limit(),
        check_shell_heat(rng),
        check_shell_flux(rng),
    ]
    return results, rows
