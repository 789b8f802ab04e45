"""Poisson arrivals, chronological storage, and the history of the block at 0.

``run`` is the reference path: one replica, driven through
:class:`~parkblock.interval_engine.CoveringState`, with a full trace.
``simulate_batch`` runs many replicas through a compiled kernel that repeats
the same arithmetic on flat arrays and keeps only what the statistical
suites need. The two are checked against each other replica by replica.
"""

from __future__ import annotations

import csv
import io
import json
import math
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernel
from .interval_engine import CoveringState
from .size_measures import SizeMeasure, parse_measure

SCHEMA_VERSION = 1
KINDS = ("left_spill", "merge")


class ConfigError(ValueError):
    pass


class QueryPastEnd(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Arrival:
    t: float
    x: float
    l: float


@dataclass(frozen=True)
class SimConfig:
    nu: SizeMeasure
    t_end: float
    half_width: float = 200.0
    margin: float = 40.0
    seed: int = 0
    trace_times: tuple = ()

    def __post_init__(self):
        m = self.nu.mean()
        if not (0 <= self.t_end < 1.0 / m):
            raise ConfigError(f"t_end={self.t_end} must lie in [0, 1/m) = [0, {1.0 / m})")
        if not self.half_width > 0:
            raise ConfigError("half_width must be positive")
        if not (0 <= self.margin < self.half_width):
            raise ConfigError("margin must lie in [0, half_width)")
        tt = tuple(sorted(float(s) for s in self.trace_times))
        if any(s < 0 or s > self.t_end for s in tt):
            raise ConfigError("trace times must lie in [0, t_end]")
        if not math.isfinite(self.nu.total_mass()):
            raise ConfigError("size measure must have finite total mass")
        object.__setattr__(self, "trace_times", tt)

    def to_dict(self) -> dict:
        return {
            "nu": self.nu.to_text(),
            "t_end": self.t_end,
            "half_width": self.half_width,
            "margin": self.margin,
            "seed": self.seed,
            "trace_times": list(self.trace_times),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        nu = d["nu"] if isinstance(d["nu"], SizeMeasure) else parse_measure(d["nu"])
        return cls(
            nu=nu,
            t_end=float(d["t_end"]),
            half_width=float(d.get("half_width", 200.0)),
            margin=float(d.get("margin", 40.0)),
            seed=int(d.get("seed", 0)),
            trace_times=tuple(d.get("trace_times", ())),
        )


@dataclass
class JumpRecord:
    i: int
    T: float
    G: float
    D: float
    R: float
    L: float
    kind: str = "left_spill"


@dataclass
class TraceSample:
    t: float
    g: float
    d: float
    l: float
    uncovered_fraction: float


@dataclass
class SimResult:
    config: SimConfig
    replica: int
    jump_log: list[JumpRecord]
    block_trace: list[tuple[float, float, float, float]]
    on_block_growth: list[tuple[float, float]]
    covering: CoveringState
    valid: bool = True
    invalidation_reason: str | None = None
    samples: list[TraceSample] = field(default_factory=list)
    spilled: float = 0.0
    n_arrivals: int = 0

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "replica": self.replica,
            "valid": self.valid,
            "invalidation_reason": self.invalidation_reason,
            "n_arrivals": self.n_arrivals,
            "spilled": self.spilled,
            "jump_log": [asdict(j) for j in self.jump_log],
            "block_trace": [list(r) for r in self.block_trace],
            "on_block_growth": [list(r) for r in self.on_block_growth],
            "samples": [asdict(s) for s in self.samples],
            "covering": self.covering.to_json(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SimResult":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {d.get('schema_version')}")
        config = SimConfig.from_dict(d["config"])
        return cls(
            config=config,
            replica=d["replica"],
            jump_log=[JumpRecord(**j) for j in d["jump_log"]],
            block_trace=[tuple(r) for r in d["block_trace"]],
            on_block_growth=[tuple(r) for r in d["on_block_growth"]],
            covering=CoveringState.from_intervals(config.half_width, d["covering"]),
            valid=d["valid"],
            invalidation_reason=d["invalidation_reason"],
            samples=[TraceSample(**s) for s in d["samples"]],
            spilled=d["spilled"],
            n_arrivals=d["n_arrivals"],
        )


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    """Independent stream for replica ``replica``; a pure function of ``(seed, replica)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replica,)))


def arrival_arrays(config: SimConfig, rng: np.random.Generator):
    """Arrivals as ``(t, x, l)`` arrays sorted by ``(t, x, l)``."""
    W = config.half_width
    mass = float(config.nu.total_mass())
    n = rng.poisson(config.t_end * 2 * W * mass)
    t = rng.uniform(0.0, config.t_end, n)
    x = rng.uniform(-W, W, n)
    l = np.asarray(config.nu.sample(rng, n), dtype=float)
    order = np.lexsort((l, x, t))
    return t[order], x[order], l[order]


def generate_arrivals(config: SimConfig, rng: np.random.Generator) -> list[Arrival]:
    t, x, l = arrival_arrays(config, rng)
    return [Arrival(*row) for row in zip(t.tolist(), x.tolist(), l.tolist())]


def run(config: SimConfig, replica: int = 0, arrivals: list[Arrival] | None = None) -> SimResult:
    """Simulate one replica and record the block containing 0.

    Each arrival is stored, then classified against the block ``[g, d)``
    holding 0 just before it:

    * ``x < g`` and the data reaches ``g``: a jump of both extremities,
      logged with the remaining data ``R = l - |free ∩ [x, g)|``. The first
      covering of 0 is logged the same way with the empty block ``[0, 0)``.
    * ``x`` on the block: growth of the right extremity only.
    * anything else leaves the block alone.
    """
    if arrivals is None:
        arrivals = generate_arrivals(config, replica_rng(config.seed, replica))
    arrivals = sorted(arrivals)
    W, margin = config.half_width, config.margin
    lo, hi = -W + margin, W - margin
    state = CoveringState(W)
    g = d = 0.0
    jumps: list[JumpRecord] = []
    trace = [(0.0, 0.0, 0.0, 0.0)]
    growth: list[tuple[float, float]] = []
    samples: list[TraceSample] = []
    pending = list(config.trace_times)
    spilled = 0.0
    valid, reason = True, None

    def take_samples(upto):
        while pending and pending[0] < upto:
            s = pending.pop(0)
            frac = state.free_measure(lo, hi) / (hi - lo)
            samples.append(TraceSample(s, g, d, d - g, frac))

    for a in arrivals:
        take_samples(a.t)
        g0, d0 = g, d
        covered = d0 > g0
        free_before = None
        if a.x < g0 or (not covered and a.x <= 0.0):
            free_before = state.free_measure(a.x, g0)
        out = state.allocate(a.x, a.l)
        spilled += out.spill
        blk = state.block_at(0.0)
        if blk is None:
            continue
        g, d = blk
        if g == g0 and d == d0:
            continue
        if free_before is not None and (g < g0 or not covered):
            R = a.l - free_before
            kind = "left_spill" if R > 0 else "merge"
            R = max(R, 0.0)
            G, D = g0 - g, d - d0
            jumps.append(JumpRecord(len(jumps) + 1, a.t, G, D, R, G + D, kind))
        else:
            growth.append((a.t, d - d0))
        trace.append((a.t, g, d, d - g))
        if g < lo or d > hi:
            valid = False
            reason = f"block [{g}, {d}) left the interior [{lo}, {hi}] at t={a.t}"
            break
    if valid:
        take_samples(math.inf)
    return SimResult(
        config=config,
        replica=replica,
        jump_log=jumps,
        block_trace=trace,
        on_block_growth=growth,
        covering=state,
        valid=valid,
        invalidation_reason=reason,
        samples=samples,
        spilled=spilled,
        n_arrivals=len(arrivals),
    )


def block_trajectory(result: SimResult, t: float) -> tuple[float, float, float]:
    """``(g(t), d(t), l(t))``; ``(0, 0, 0)`` while 0 is uncovered."""
    if t > result.config.t_end:
        raise QueryPastEnd(f"t={t} beyond t_end={result.config.t_end}")
    if not result.valid:
        raise ValueError("result is invalid: " + str(result.invalidation_reason))
    times = [r[0] for r in result.block_trace]
    k = bisect_right(times, t) - 1
    _, g, d, l = result.block_trace[k]
    return g, d, l


def jump_log_csv(results) -> str:
    """CSV with columns ``replica,i,T,G,D,R,L,kind``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replica", "i", "T", "G", "D", "R", "L", "kind"])
    for res in results:
        for j in res.jump_log:
            w.writerow([res.replica, j.i, repr(j.T), repr(j.G), repr(j.D), repr(j.R), repr(j.L), j.kind])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# batches


@dataclass
class ReplicaBatch:
    """Flat per-replica and per-jump arrays for a set of replicas.

    Batches over disjoint replica sets combine with :meth:`merge`; the result
    does not depend on the order in which pieces are merged.
    """

    config: SimConfig
    replica: np.ndarray
    valid: np.ndarray
    spilled: np.ndarray
    n_arrivals: np.ndarray
    n_growth: np.ndarray
    trace: np.ndarray  # (n_replicas, n_trace, 4): g, d, l, uncovered fraction
    jump_replica: np.ndarray
    jump_i: np.ndarray
    T: np.ndarray
    G: np.ndarray
    D: np.ndarray
    R: np.ndarray
    kind: np.ndarray  # index into KINDS

    @property
    def L(self):
        return self.G + self.D

    def __len__(self):
        return self.replica.size

    @property
    def discard_rate(self) -> float:
        return float(1.0 - self.valid.mean()) if self.valid.size else 0.0

    def merge(self, other: "ReplicaBatch") -> "ReplicaBatch":
        if other.config != self.config:
            raise ValueError("cannot merge batches with different configs")
        if np.intersect1d(self.replica, other.replica).size:
            raise ValueError("replica sets overlap")
        rep = np.concatenate([self.replica, other.replica])
        order = np.argsort(rep, kind="stable")
        per_rep = {
            name: np.concatenate([getattr(self, name), getattr(other, name)])[order]
            for name in ("replica", "valid", "spilled", "n_arrivals", "n_growth", "trace")
        }
        jr = np.concatenate([self.jump_replica, other.jump_replica])
        ji = np.concatenate([self.jump_i, other.jump_i])
        jorder = np.lexsort((ji, jr))
        per_jump = {
            name: np.concatenate([getattr(self, name), getattr(other, name)])[jorder]
            for name in ("jump_replica", "jump_i", "T", "G", "D", "R", "kind")
        }
        return ReplicaBatch(self.config, **per_rep, **per_jump)

    def valid_jumps(self) -> np.ndarray:
        """Mask over jumps belonging to valid replicas."""
        ok = np.isin(self.jump_replica, self.replica[self.valid])
        return ok

    def jump_times_by_replica(self) -> list[np.ndarray]:
        """Jump times of each valid replica, in replica order."""
        mask = self.valid_jumps()
        jr, T = self.jump_replica[mask], self.T[mask]
        good = self.replica[self.valid]
        cuts = np.searchsorted(jr, good, side="left"), np.searchsorted(jr, good, side="right")
        return [T[a:b] for a, b in zip(*cuts)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replica", "i", "T", "G", "D", "R", "L", "kind"])
        mask = self.valid_jumps()
        for r, i, T, G, D, R, k in zip(
            self.jump_replica[mask], self.jump_i[mask], self.T[mask], self.G[mask],
            self.D[mask], self.R[mask], self.kind[mask],
        ):
            w.writerow([int(r), int(i), repr(float(T)), repr(float(G)), repr(float(D)),
                        repr(float(R)), repr(float(G + D)), KINDS[k]])
        return buf.getvalue()


def _run_chunk(config: SimConfig, replicas: np.ndarray) -> ReplicaBatch:
    W, margin = config.half_width, config.margin
    tt = np.asarray(config.trace_times, dtype=float)
    n_rep = replicas.size
    valid = np.zeros(n_rep, dtype=bool)
    spilled = np.zeros(n_rep)
    n_arr = np.zeros(n_rep, dtype=np.int64)
    n_growth = np.zeros(n_rep, dtype=np.int64)
    trace = np.full((n_rep, tt.size, 4), np.nan)
    jr, ji, jT, jG, jD, jR, jk = [], [], [], [], [], [], []
    for k, rep in enumerate(replicas.tolist()):
        t, x, l = arrival_arrays(config, replica_rng(config.seed, rep))
        jumps, kinds, tr, n_j, ok, spill, n_g = _kernel.simulate(t, x, l, W, margin, tt)
        valid[k] = ok
        spilled[k] = spill
        n_arr[k] = t.size
        n_growth[k] = n_g
        trace[k] = tr
        if n_j:
            jr.append(np.full(n_j, rep, dtype=np.int64))
            ji.append(np.arange(1, n_j + 1, dtype=np.int64))
            jT.append(jumps[:n_j, 0])
            jG.append(jumps[:n_j, 1])
            jD.append(jumps[:n_j, 2])
            jR.append(jumps[:n_j, 3])
            jk.append(kinds[:n_j])

    def cat(parts, dtype):
        return np.concatenate(parts) if parts else np.zeros(0, dtype=dtype)

    return ReplicaBatch(
        config, replicas.astype(np.int64), valid, spilled, n_arr, n_growth, trace,
        cat(jr, np.int64), cat(ji, np.int64), cat(jT, float), cat(jG, float),
        cat(jD, float), cat(jR, float), cat(jk, np.int8),
    )


def simulate_batch(config: SimConfig, replicas, workers: int = 1, chunk: int = 2000) -> ReplicaBatch:
    """Run replicas ``range(replicas)`` (or the given indices) of ``config``."""
    reps = np.arange(replicas) if np.isscalar(replicas) else np.asarray(replicas, dtype=np.int64)
    if reps.size == 0:
        raise ConfigError("at least one replica is required")
    pieces = [reps[i : i + chunk] for i in range(0, reps.size, chunk)]
    if workers > 1 and len(pieces) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, [config] * len(pieces), pieces))
    else:
        parts = [_run_chunk(config, p) for p in pieces]
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    return out
