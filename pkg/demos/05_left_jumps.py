"""
Sizes of the jumps
==================

At a jump time ``T_i = t`` the left end moves by ``G_i``, whose density for
unit files is ``(1-t) e^{-tx} (tx)^[x]/[x]!``. The remaining data ``R_i`` is
uniform and the right end moves by the first passage of ``R_i`` through the
free space right of the block.

The mean of that density is ``(t/(1-mt)^2 + 1/(2m(1-mt))) int l^2 nu(dl)``,
which is 3 at ``t = 0.5``. A different closed form, giving 5, also
circulates; the simulation settles which one holds.
"""

import numpy as np

from parkblock import Dirac, SimConfig, simulate_batch
from parkblock import theory as th

t, half = 0.5, 0.02
config = SimConfig(Dirac(1.0), t_end=t + half, half_width=200.0, margin=40.0, seed=9)
batch = simulate_batch(config, 30_000)
near = batch.valid_jumps() & (np.abs(batch.T - t) <= half) & (batch.kind == 0)
G, D, R = batch.G[near], batch.D[near], batch.R[near]
print(f"{G.size} jumps with T in [{t - half}, {t + half}]")

P = th.ModelParams(Dirac(1.0), t)
se = G.std(ddof=1) / np.sqrt(G.size)
print(f"E[G | T ~ t]: simulated {G.mean():.3f} +- {se:.3f}")
print(f"  mean of the density: {th.mean_G_given_T_exact(P):.3f}")
print(f"  other closed form:   {th.mean_G_given_T(P):.3f}")

edges = np.arange(0, 6.5, 0.5)
emp = np.histogram(G, edges)[0] / G.size
cdf = th.g_left_jump_cdf_dirac(t, edges)
print("\nG cell   simulated  density")
for a, e, c in zip(edges, emp, np.diff(cdf)):
    print(f"[{a:.1f},{a + 0.5:.1f}) {e:9.4f} {c:9.4f}")

k = np.floor(D).astype(int)
print("\nfloor(D)  simulated  first passage of U(0,1)")
for n in range(6):
    print(f"{n:8d} {np.mean(k == n):10.4f} {th.tau_mixture_pmf(t, n):10.4f}")
print(f"\nR: mean {R.mean():.4f} (uniform: 0.5)")
