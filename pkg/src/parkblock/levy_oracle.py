"""Second, independent construction of the covering from the Levy path.

For the files arrived by time ``t`` the path is

    Y(0) = 0,   Y(b) - Y(a) = sum of sizes located in ]a, b]  -  (b - a),

with running infimum ``I(x) = inf{Y(y) : -W <= y <= x}``. The covered set is
``{Y > I}`` and the free set ``{Y = I}``. Nothing here replays arrivals in
time order; the whole set of files is read off the path at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interval_engine import CoveringState, WindowExhausted


class BoundaryInfimum(RuntimeError):
    """The running infimum is attained too close to the left edge of the window."""


@dataclass(frozen=True)
class LevyPath:
    half_width: float
    locations: np.ndarray  # sorted, unique
    sizes: np.ndarray  # total size stored at each location
    margin: float = 0.0

    def __post_init__(self):
        # cumulative size S(x) = sum of sizes at locations <= x, shifted so Y(0) = 0
        cum = np.concatenate([[0.0], np.cumsum(self.sizes)])
        k0 = np.searchsorted(self.locations, 0.0, side="right")
        object.__setattr__(self, "_cum", cum)
        object.__setattr__(self, "_cum0", cum[k0])
        # left limits at each jump and their running minimum (including Y(-W-))
        y_left = cum[:-1] - self._cum0 - self.locations
        y_start = self._cum0 * -1.0 + self.half_width  # Y(-W-) : no mass at or before -W yet
        object.__setattr__(self, "_y_start", y_start)
        object.__setattr__(self, "_prefix_min", np.minimum.accumulate(np.minimum(y_left, y_start)) if y_left.size else y_left)

    def value(self, x):
        """``Y(x)`` (right-continuous)."""
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.locations, x, side="right")
        return (self._cum[k] - self._cum0 - x)[()]

    def left_limit(self, x):
        """``Y(x-)``."""
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.locations, x, side="left")
        return (self._cum[k] - self._cum0 - x)[()]

    def infimum(self, x):
        """``I(x) = inf{Y(y) : -W <= y <= x}``; left limits count."""
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.locations, x, side="right")
        prev = np.where(k > 0, self._prefix_min[np.maximum(k - 1, 0)] if self._prefix_min.size else np.inf, np.inf)
        out = np.minimum(np.minimum(prev, self._y_start), self.left_limit(x))
        return out[()]


def build_path(arrivals, t: float, half_width: float, margin: float = 0.0) -> LevyPath:
    """Path of the files with arrival time ``<= t``.

    ``arrivals`` is an iterable of objects with ``t``, ``x``, ``l`` attributes
    or an ``(n, 3)`` array of ``(t, x, l)`` rows.
    """
    arr = _as_array(arrivals)
    arr = arr[arr[:, 0] <= t]
    if arr.size and (arr[:, 1].min() < -half_width or arr[:, 1].max() > half_width):
        raise ValueError("arrival outside window")
    locs, inv = np.unique(arr[:, 1], return_inverse=True)
    sizes = np.zeros(locs.size)
    np.add.at(sizes, inv, arr[:, 2])
    return LevyPath(float(half_width), locs, sizes, float(margin))


def _as_array(arrivals) -> np.ndarray:
    if isinstance(arrivals, np.ndarray):
        return arrivals.reshape(-1, 3).astype(float)
    rows = [(a.t, a.x, a.l) for a in arrivals]
    return np.asarray(rows, dtype=float).reshape(-1, 3)


def _blocks(path: LevyPath) -> list[tuple[float, float]]:
    """Sweep the jumps left to right, carrying the excess ``Y - I``.

    Between jumps the excess falls at unit rate; a block ends where it hits
    zero, which is solved exactly on each linear piece.
    """
    W = path.half_width
    blocks: list[tuple[float, float]] = []
    excess = 0.0
    pos = -W
    start = None
    for x, s in zip(path.locations.tolist(), path.sizes.tolist()):
        if start is not None:
            if excess <= x - pos:
                end = pos + excess
                if end == x:
                    # block touches the next file exactly; the file continues it
                    excess = s
                    pos = x
                    continue
                blocks.append((start, end))
                start = None
                excess = 0.0
            else:
                excess -= x - pos
        if start is None:
            start = x
        excess += s
        pos = x
    if start is not None:
        blocks.append((start, min(pos + excess, W)))
    return blocks


def covering_from_path(path: LevyPath) -> CoveringState:
    blocks = _blocks(path)
    if path.margin > 0:
        guard = -path.half_width + path.margin
        for a, b in blocks:
            if a < guard < b:
                raise BoundaryInfimum(f"block [{a}, {b}) straddles the guard point {guard}")
    return CoveringState.from_intervals(path.half_width, blocks)


def remaining_mass(path: LevyPath, p: float, left_limit: bool = False) -> float:
    """Quantity of data that went over location ``p``: ``Y(p) - I(p)``.

    With ``left_limit=True`` the value is ``Y(p-) - I(p-)``, which leaves out
    any file located exactly at ``p``.
    """
    y = path.left_limit(p) if left_limit else path.value(p)
    inf = path.infimum(p)
    if path.margin > 0:
        guard = -path.half_width + path.margin
        if p >= guard:
            # where is I(p) attained? the left end of the block holding p (or p-)
            for a, b in _blocks(path):
                if a <= p < b or (left_limit and a < p <= b):
                    if a < guard:
                        raise BoundaryInfimum(f"infimum at {p} attained at {a} < {guard}")
                    break
    return max(float(y - inf), 0.0)


def tau_forward(state: CoveringState, origin: float, z: float) -> float:
    """First passage of the free-space clock started at ``origin``.

    Returns the smallest ``y`` such that the free measure of
    ``[origin, origin + y)`` exceeds ``z``; blocks met on the way are jumped
    over whole, so this is the right-extremity displacement caused by storing
    a quantity ``z`` of data at ``origin``.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    W = state.half_width
    starts = np.asarray(state.starts, dtype=float)
    ends = np.asarray(state.ends, dtype=float)
    keep = ends > origin
    starts, ends = starts[keep], ends[keep]
    # free gaps [gap_lo[k], gap_hi[k]) to the right of origin
    gap_lo = np.concatenate([[origin], ends])
    gap_hi = np.concatenate([starts, [W]])
    gap_lo = np.maximum(gap_lo, origin)
    room = np.maximum(gap_hi - gap_lo, 0.0)
    before = np.concatenate([[0.0], np.cumsum(room)[:-1]])
    k = np.flatnonzero(before + room > z)
    if k.size == 0:
        raise WindowExhausted(f"free space right of {origin} is {room.sum()} <= {z}")
    k = k[0]
    return float(gap_lo[k] + (z - before[k]) - origin)
