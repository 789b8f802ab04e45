"""
Length and position of the block at a fixed time
================================================

For unit files the block length ``l(t)`` follows the size-biased Borel law
and the origin sits uniformly inside the block. The Laplace transform of
``g(t)`` comes from ``P(Y_x > 0)``.
"""

import numpy as np

from parkblock import Dirac, SimConfig, simulate_batch
from parkblock import theory as th
from parkblock.stats import chi_square_pmf_test

t = 0.5
config = SimConfig(Dirac(1.0), t_end=t, half_width=200.0, margin=40.0, seed=5, trace_times=(t,))
batch = simulate_batch(config, 20_000)
g, d, l, free = batch.trace[batch.valid, 0, :].T

n = np.rint(l).astype(int)
counts = np.bincount(np.minimum(n, 11), minlength=12)
probs = th.borel_size_biased_pmf(t, np.arange(11))
probs = np.append(probs, 1 - probs.sum())
print(" n  observed  expected")
for k in range(12):
    print(f"{k:2d} {counts[k] / n.size:9.4f} {probs[k]:9.4f}")
print("chi-square:", chi_square_pmf_test(counts, probs).to_dict())

rep, rho = th.uniform_split_law_check(g, d, l)
print(f"-g/l uniform: p={rep.p_value:.3f}, rank correlation with l {rho:+.4f}")
print(f"uncovered fraction {free.mean():.4f}, expected {1 - t}")

P = th.ModelParams(Dirac(1.0), t)
for lam in (0.5, 1.0):
    e = np.exp(lam * g)
    print(f"E exp({lam} g): simulated {e.mean():.4f} +- {e.std() / np.sqrt(e.size):.4f}, formula {th.g_laplace(P, lam):.4f}")
