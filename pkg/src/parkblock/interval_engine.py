"""Covered set of the hardware on a bounded window, and the storage rule.

The covering is kept as two sorted lists of left and right endpoints of
disjoint, coalesced, half-open intervals ``[a, b)``. Free space is never
stored; it is read off as the gaps between neighbours.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field


class WindowExhausted(ValueError):
    pass


@dataclass
class AllocationOutcome:
    fragments: list[tuple[float, float]]
    spilled_past_window: bool
    consumed: float
    spill: float = 0.0


@dataclass
class CoveringState:
    half_width: float
    starts: list[float] = field(default_factory=list)
    ends: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        self.normalize()

    @classmethod
    def from_intervals(cls, half_width: float, intervals) -> "CoveringState":
        ivs = sorted((float(a), float(b)) for a, b in intervals)
        return cls(half_width, [a for a, _ in ivs], [b for _, b in ivs])

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.starts, self.ends))

    def __len__(self):
        return len(self.starts)

    def copy(self) -> "CoveringState":
        return CoveringState(self.half_width, list(self.starts), list(self.ends))

    def normalize(self) -> None:
        """Sort, drop empty intervals and coalesce overlapping or touching ones."""
        W = self.half_width
        pairs = sorted(
            (max(a, -W), min(b, W)) for a, b in zip(self.starts, self.ends) if min(b, W) > max(a, -W)
        )
        starts: list[float] = []
        ends: list[float] = []
        for a, b in pairs:
            if ends and a <= ends[-1]:
                if b > ends[-1]:
                    ends[-1] = b
            else:
                starts.append(a)
                ends.append(b)
        self.starts, self.ends = starts, ends

    def covered_length(self, a: float | None = None, b: float | None = None) -> float:
        W = self.half_width
        a = -W if a is None else a
        b = W if b is None else b
        return (b - a) - self.free_measure(a, b)

    def allocate(self, x: float, l: float) -> AllocationOutcome:
        """Store a file of size ``l`` arriving at ``x``.

        Free gaps at locations ``>= x`` are filled left to right. Data that
        cannot fit before the right edge of the window is reported as spill.
        """
        W = self.half_width
        if not (-W <= x <= W):
            raise ValueError(f"x={x} outside window [-{W}, {W}]")
        if not l > 0:
            raise ValueError("file size must be positive")
        starts, ends = self.starts, self.ends
        j = bisect_right(ends, x)  # first interval with end > x
        if j < len(starts) and starts[j] <= x:
            first, left, cur = j, starts[j], ends[j]
            k = j + 1
        elif j > 0 and ends[j - 1] == x:
            # x is the (free) right endpoint of interval j-1: touching, coalesce
            first, left, cur = j - 1, starts[j - 1], x
            k = j
        else:
            first, left, cur = j, x, x
            k = j

        remaining = l
        fragments = []
        spill = 0.0
        while True:
            gap_end = starts[k] if k < len(starts) else W
            room = gap_end - cur
            if remaining < room:
                fragments.append((cur, cur + remaining))
                cur = cur + remaining
                remaining = 0.0
                break
            if room > 0:
                fragments.append((cur, gap_end))
            remaining -= room
            if k < len(starts):
                cur = ends[k]
                k += 1
                if remaining == 0.0:
                    break
            else:
                cur = W
                spill = remaining
                break
        # intervals first..k-1 collapse into [left, cur)
        starts[first:k] = [left]
        ends[first:k] = [cur]
        return AllocationOutcome(fragments, spill > 0, l - spill, spill)

    def block_at(self, p: float):
        """The covered interval containing ``p``, or ``None`` if ``p`` is free."""
        j = bisect_right(self.ends, p)
        if j < len(self.starts) and self.starts[j] <= p:
            return (self.starts[j], self.ends[j])
        return None

    def free_measure(self, a: float, b: float) -> float:
        """Lebesgue measure of ``[a, b)`` minus the covered set."""
        if b <= a:
            return 0.0
        starts, ends = self.starts, self.ends
        j = bisect_right(ends, a)
        free = 0.0
        cur = a
        while j < len(starts) and starts[j] < b:
            if starts[j] > cur:
                free += starts[j] - cur
            cur = max(cur, ends[j])
            if cur >= b:
                return free
            j += 1
        return free + (b - cur)

    def first_free_at_or_after(self, x: float) -> float:
        j = bisect_right(self.ends, x)
        if j < len(self.starts) and self.starts[j] <= x:
            return min(self.ends[j], self.half_width)
        return x

    def validate(self) -> None:
        W = self.half_width
        for i, (a, b) in enumerate(zip(self.starts, self.ends)):
            if not (-W <= a < b <= W):
                raise AssertionError(f"bad interval [{a}, {b})")
            if i and not self.ends[i - 1] < a:
                raise AssertionError("intervals overlap or touch")

    def to_json(self) -> list[list[float]]:
        return [[a, b] for a, b in zip(self.starts, self.ends)]
