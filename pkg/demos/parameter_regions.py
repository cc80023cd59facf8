"""Map the feasible (alpha, lambda) region for a given certificate.

The relaxation bound is lambda < phi(alpha) * psi with
phi(alpha) = (1 - alpha)^2 / (2 alpha^2 - alpha + 1), so larger inertia
buys less relaxation.  This prints an ASCII picture of the region for a
representative certificate plus the closed-form boundary values.
"""

import numpy as np

from nfbkit.certificates import (alpha_bound, lambda_interval,
                                 make_certificate, phi_value, psi_value)

ZETA, EPS = 0.5, 0.1

psi = psi_value(ZETA, EPS, 0.0)
lo, hi = lambda_interval(psi, alpha=0.0)
print(f"certificate: zeta={ZETA}, epsilon={EPS}  ->  psi={psi}")
print(f"zero-inertia relaxation interval: ({lo}, {hi:.6f})")
print()

# ASCII map: rows are lambda from high to low, columns alpha left to right
alphas = np.linspace(0.0, 0.95, 64)
lams = np.linspace(1.9, 0.05, 24)
print("      alpha: 0" + " " * 56 + "0.95")
for lam in lams:
    row = "".join("#" if lam < phi_value(a) * psi else "."
                  for a in alphas)
    print(f"lambda {lam:4.2f}  {row}")
print()
print("'#' feasible, '.' infeasible (lambda >= phi(alpha) * psi)")
print()

# the largest admissible inertia for a handful of relaxations
print(" lambda   alpha_sup   phi(alpha_sup)*psi (= boundary)")
for lam in (0.25, 0.5, 0.75, 1.0, 1.25, 1.5):
    sup, attained = alpha_bound(psi, lam)
    edge = phi_value(sup) * psi if attained else float("nan")
    print(f" {lam:5.2f}   {sup:.9f}   {edge:.9f}")
print()

# a certificate bundles the same decisions with margins attached
cert = make_certificate(ZETA, EPS, lam=1.0, alpha=0.2)
print("make_certificate(zeta=0.5, epsilon=0.1, lam=1.0, alpha=0.2):")
for key, val in cert.to_dict().items():
    print(f"  {key} = {val}")
