"""
The block containing the origin
===============================

One replica, unit file sizes, loaded up to ``t = 0.6``. The block
``[g(t), d(t))`` around 0 only moves by jumps: a file stored on the block
pushes ``d`` right, a file from the left that does not fit moves ``g`` left
by ``G_i`` and ``d`` right by ``D_i`` at the same time ``T_i``.
"""

from parkblock import Dirac, SimConfig, block_trajectory, run

config = SimConfig(Dirac(1.0), t_end=0.6, half_width=60.0, margin=10.0, seed=3)
result = run(config, replica=1)
print(f"{result.n_arrivals} arrivals, valid={result.valid}")

print("\n   T        G        D        R     kind")
for j in result.jump_log:
    print(f"{j.T:.4f} {j.G:8.3f} {j.D:8.3f} {j.R:8.3f}  {j.kind}")

print("\nfiles landing on the block (time, size):", [(round(t, 3), s) for t, s in result.on_block_growth][:5])
for t in (0.2, 0.4, 0.6):
    g, d, l = block_trajectory(result, t)
    print(f"t={t}: block [{g:.3f}, {d:.3f}) of length {l:.3f}")

print("\nJSON record starts with:", result.to_json()[:80], "...")
