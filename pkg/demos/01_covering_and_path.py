"""
Storing files on the line and reading the covering off a path
=============================================================

Files arrive at random places and slide right into free space, breaking
into pieces when they hit stored data. The same covering is the set where
the spatial path ``Y`` sits strictly above its running infimum.
"""

import numpy as np

from parkblock import Arrival, CoveringState, build_path, covering_from_path

# three files: the last one does not fit before the block at 0 and spills over it
arrivals = [Arrival(0.1, -2.0, 1.0), Arrival(0.2, 0.0, 1.0), Arrival(0.3, -1.5, 2.0)]

state = CoveringState(10.0)
for a in arrivals:
    out = state.allocate(a.x, a.l)
    print(f"file at {a.x:+.1f} of size {a.l:g} -> pieces {out.fragments}")
print("covering:", state.intervals)

path = build_path(arrivals, 1.0, 10.0)
xs = np.linspace(-4, 4, 17)
print("Y(x)  :", np.round(path.value(xs), 2))
print("inf   :", np.round(path.infimum(xs), 2))
print("from the path:", covering_from_path(path).intervals)

# the two agree on random instances with ties and all
rng = np.random.default_rng(0)
for _ in range(200):
    n = rng.integers(1, 40)
    rows = np.column_stack([np.sort(rng.uniform(0, 1, n)), rng.uniform(-8, 8, n), rng.exponential(1, n)])
    s = CoveringState(16.0)
    for _, x, l in rows:
        s.allocate(x, l)
    ref = covering_from_path(build_path(rows, 1.0, 16.0))
    assert np.allclose(s.starts, ref.starts) and np.allclose(s.ends, ref.ends)
print("engine and path covering agree on 200 random instances")
