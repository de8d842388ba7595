"""Decay rates of the thermoelastic indicator and the lens integral.

The rate check builds the indicator surrogate for a ball inclusion of radius
0.6 with unit elastic moduli and fits log S = a + b tau + c log tau; b should
approach -2 sqrt(rho/mu) (R1 - R_D) = -0.8.  The lens integral grows like
exp(2 tau R_D) times a power of tau that depends on the direction a, and the
parallel case loses one extra power.

Run:  python demos/thermo_rates.py
"""

import numpy as np

from enclab.geometry import Ball
from enclab.thermo import ElasticParams, TouchingBallGeom, alpha_hat, growth_fit, lens_growth_integral, elastic_rate_check

R_D = 0.6
rc = elastic_rate_check(ElasticParams(1.0, 1.0, 1.0, 1.0), 1.0, 2.0, R_D, T_values=(0.7, 1.0))
print(f"rate {rc.rate:.5f}  target {rc.target}  relative error {rc.rel_error:.1e}")
for T, outcome in rc.dichotomy.items():
    print(f"  exp(tau T) S at T = {T}: {outcome}")

plain = elastic_rate_check(ElasticParams(1.0, 1.0, 1.0, 1.0), 1.0, 2.0, R_D, log_term=False)
print(f"without the log tau column the fit gives {plain.rate:.4f}\n")

geom = TouchingBallGeom.for_ball(np.zeros(3), Ball(np.zeros(3), R_D))
taus = np.geomspace(50.0, 200.0, 12) / R_D
for name, a in (("perpendicular", geom.b), ("parallel", geom.nu_q)):
    scaled = np.array([lens_growth_integral(t, geom, a, scaled=True) for t in taus])
    fit = growth_fit(taus, np.log(scaled) + 2 * taus * R_D)
    print(f"{name:>13}: exponent {fit.rate:.5f} (2 R_D = {2 * R_D}), power alpha_hat {alpha_hat(taus, scaled):.3f}")
