"""
Jump times of the left end
==========================

The times at which ``g`` jumps form a Poisson process of rate
``m/(1 - mt)``: ``-log(1 - mt)`` jumps by time ``t`` on average, the first
one uniform on ``[0, 1/m]``, and each next one uniform between the last one
and ``1/m``.
"""

import numpy as np

from parkblock import Dirac, SimConfig, simulate_batch
from parkblock import theory as th
from parkblock.stats import ks_test, rank_correlation

t = 0.5
config = SimConfig(Dirac(1.0), t_end=t, half_width=200.0, margin=40.0, seed=11)
batch = simulate_batch(config, 30_000)
print(f"discarded replicas: {batch.discard_rate:.2%}")

P = th.ModelParams(Dirac(1.0), t)
counts = np.bincount(np.searchsorted(batch.replica, batch.jump_replica), minlength=batch.replica.size)
print(f"mean jump count {counts.mean():.4f}, expected {th.expected_jump_count(P):.4f}")

# jumps are seen only up to t, so normalise by t rather than 1/m
first = batch.jump_i == 1
T1 = batch.T[first]
# at level 0.01 about one seed in a hundred rejects by chance
print("T1 given T1 <= t vs U(0, t):", ks_test(T1 / t, lambda u: np.clip(u, 0, 1)).to_dict())

second = batch.jump_i == 2
has2 = np.isin(batch.jump_replica[first], batch.jump_replica[second])
u1 = T1[has2] / t
u2 = (batch.T[second] - T1[has2]) / (t - T1[has2])
print("U2 vs U(0,1):", ks_test(u2, lambda u: np.clip(u, 0, 1)).to_dict())
print(f"rank correlation of U1, U2: {rank_correlation(u1, u2):+.4f}")
