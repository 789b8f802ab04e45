"""
Laplace exponents and identities
================================

``psi(rho) = -rho + t int (1 - e^{-rho x}) nu(dx)`` is the exponent of the
spatial path; ``kappa`` inverts ``-psi``. For unit files the Levy measure
``Pi`` of ``kappa`` has explicit atoms, and its mass, its mean and
``kappa'(0)`` all have closed forms.
"""

import numpy as np

from parkblock import Dirac, Exponential, Gamma
from parkblock import theory as th

for nu in (Dirac(1.0), Exponential(1.0), Gamma(2.0, 0.5)):
    P = th.ModelParams(nu, 0.5 / nu.mean())
    s = np.logspace(-3, 3, 7)
    err = np.max(np.abs(th.kappa(P, -th.psi(P, s)) - s) / s)
    rep = th.relations_check(P)
    print(f"{nu.to_text():12s} kappa(-psi(s)) rel. error {err:.1e}; residuals {np.array(rep.residuals)}")

P = th.ModelParams(Dirac(1.0), 0.5)
sizes, masses = th.pi_atoms(P)
print(f"\nPi atoms kept: {sizes.size}; mass {masses.sum():.6f}, mean {sizes @ masses:.6f}")
print("first atoms:", np.round(masses[:5], 6))

left, right, res = th.first_passage_identity_check(1.0, 0.5)
print(f"first-passage identity: {left:.7f} vs {right:.7f}")
rho = th.rho_marginal_consistency_dirac(0.5)
print(f"jump intensity total mass {rho.total_via_G:.8f} (target {rho.target})")
