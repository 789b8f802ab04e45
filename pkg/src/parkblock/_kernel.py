"""Compiled replica loop.

Same arithmetic, in the same order, as ``CoveringState.allocate`` /
``free_measure`` and ``simulator.run``; intervals live in two preallocated
arrays. Kept free of Python objects so numba can compile it in nopython mode.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _free_measure(starts, ends, n, a, b):
    if b <= a:
        return 0.0
    j = np.searchsorted(ends[:n], a, side="right")
    free = 0.0
    cur = a
    while j < n and starts[j] < b:
        if starts[j] > cur:
            free += starts[j] - cur
        cur = max(cur, ends[j])
        if cur >= b:
            return free
        j += 1
    return free + (b - cur)


@njit(cache=True)
def _allocate(starts, ends, n, x, l, W):
    """Returns (new interval count, spill)."""
    j = np.searchsorted(ends[:n], x, side="right")
    if j < n and starts[j] <= x:
        first = j
        left = starts[j]
        cur = ends[j]
        k = j + 1
    elif j > 0 and ends[j - 1] == x:
        first = j - 1
        left = starts[j - 1]
        cur = x
        k = j
    else:
        first = j
        left = x
        cur = x
        k = j
    remaining = l
    spill = 0.0
    while True:
        gap_end = starts[k] if k < n else W
        room = gap_end - cur
        if remaining < room:
            cur = cur + remaining
            break
        remaining -= room
        if k < n:
            cur = ends[k]
            k += 1
            if remaining == 0.0:
                break
        else:
            cur = W
            spill = remaining
            break
    removed = k - first
    if removed == 0:
        for i in range(n, first, -1):
            starts[i] = starts[i - 1]
            ends[i] = ends[i - 1]
        n += 1
    elif removed > 1:
        shift = removed - 1
        for i in range(first + 1, n - shift):
            starts[i] = starts[i + shift]
            ends[i] = ends[i + shift]
        n -= shift
    starts[first] = left
    ends[first] = cur
    return n, spill


@njit(cache=True)
def _block_at_zero(starts, ends, n):
    j = np.searchsorted(ends[:n], 0.0, side="right")
    if j < n and starts[j] <= 0.0:
        return True, starts[j], ends[j]
    return False, 0.0, 0.0


@njit(cache=True)
def simulate(t, x, l, W, margin, trace_times):
    """One replica over sorted arrivals.

    Returns ``(jumps, kinds, trace, n_jumps, valid, spilled, n_growth)`` where
    ``jumps[:n_jumps]`` holds rows ``(T, G, D, R)``, ``kinds`` is 0 for a
    left spill and 1 for a merge with nothing left over, and ``trace`` holds
    ``(g, d, l, uncovered fraction of the interior)`` per trace time.
    """
    n_arr = t.size
    starts = np.empty(n_arr + 1)
    ends = np.empty(n_arr + 1)
    n = 0
    lo = -W + margin
    hi = W - margin
    jumps = np.empty((n_arr, 4))
    kinds = np.zeros(n_arr, dtype=np.int8)
    trace = np.full((trace_times.size, 4), np.nan)
    n_jumps = 0
    n_growth = 0
    spilled = 0.0
    valid = True
    g = 0.0
    d = 0.0
    q = 0
    for i in range(n_arr):
        while q < trace_times.size and trace_times[q] < t[i]:
            trace[q, 0] = g
            trace[q, 1] = d
            trace[q, 2] = d - g
            trace[q, 3] = _free_measure(starts, ends, n, lo, hi) / (hi - lo)
            q += 1
        g0 = g
        d0 = d
        covered = d0 > g0
        check_left = x[i] < g0 or ((not covered) and x[i] <= 0.0)
        free_before = 0.0
        if check_left:
            free_before = _free_measure(starts, ends, n, x[i], g0)
        n, sp = _allocate(starts, ends, n, x[i], l[i], W)
        spilled += sp
        found, gg, dd = _block_at_zero(starts, ends, n)
        if not found:
            continue
        g = gg
        d = dd
        if g == g0 and d == d0:
            continue
        if check_left and (g < g0 or not covered):
            R = l[i] - free_before
            jumps[n_jumps, 0] = t[i]
            jumps[n_jumps, 1] = g0 - g
            jumps[n_jumps, 2] = d - d0
            if R > 0:
                jumps[n_jumps, 3] = R
                kinds[n_jumps] = 0
            else:
                jumps[n_jumps, 3] = 0.0
                kinds[n_jumps] = 1
            n_jumps += 1
        else:
            n_growth += 1
        if g < lo or d > hi:
            valid = False
            break
    if valid:
        while q < trace_times.size:
            trace[q, 0] = g
            trace[q, 1] = d
            trace[q, 2] = d - g
            trace[q, 3] = _free_measure(starts, ends, n, lo, hi) / (hi - lo)
            q += 1
    return jumps, kinds, trace, n_jumps, valid, spilled, n_growth
