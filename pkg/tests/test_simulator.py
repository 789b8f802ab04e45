import json
import math

import numpy as np
import pytest

from parkblock.levy_oracle import build_path, covering_from_path
from parkblock.simulator import (
    Arrival,
    ConfigError,
    QueryPastEnd,
    SimConfig,
    SimResult,
    arrival_arrays,
    block_trajectory,
    generate_arrivals,
    jump_log_csv,
    replica_rng,
    run,
    simulate_batch,
)
from parkblock.size_measures import Dirac, Exponential, FiniteDiscrete, Gamma
from parkblock.stats import rank_correlation

SMALL = SimConfig(Dirac(1.0), 0.5, 10.0, 1.0)


def test_arrival_count_mean():
    cfg = SimConfig(Dirac(1.0), 0.5, 50.0, 5.0)
    counts = [arrival_arrays(cfg, replica_rng(3, k))[0].size for k in range(10_000)]
    assert abs(np.mean(counts) - 50) < 0.5


def test_arrivals_sorted_and_in_bounds():
    cfg = SimConfig(Gamma(2.0, 0.5), 0.7, 20.0, 2.0)
    arr = generate_arrivals(cfg, replica_rng(0, 0))
    assert arr == sorted(arr)
    for a in arr:
        assert 0 <= a.t <= 0.7 and -20 <= a.x <= 20 and a.l > 0


def test_zero_horizon_is_empty():
    cfg = SimConfig(Dirac(1.0), 0.0, 10.0, 1.0)
    assert generate_arrivals(cfg, replica_rng(0, 0)) == []


def test_replica_streams_are_reproducible_and_distinct():
    a = arrival_arrays(SMALL, replica_rng(5, 2))
    b = arrival_arrays(SMALL, replica_rng(5, 2))
    c = arrival_arrays(SMALL, replica_rng(5, 3))
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    assert not np.array_equal(a[1], c[1])


def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(Dirac(1.0), 1.0)
    with pytest.raises(ConfigError):
        SimConfig(Dirac(2.0), 0.6)
    with pytest.raises(ConfigError):
        SimConfig(Dirac(1.0), 0.5, 10.0, 10.0)
    with pytest.raises(ConfigError):
        SimConfig(Dirac(1.0), 0.5, trace_times=(0.7,))


def test_first_coverage_is_a_jump():
    res = run(SMALL, arrivals=[Arrival(0.3, 0.0, 1.0)])
    assert len(res.jump_log) == 1
    j = res.jump_log[0]
    assert (j.T, j.G, j.D, j.R, j.L, j.kind) == (0.3, 0.0, 1.0, 1.0, 1.0, "left_spill")
    assert block_trajectory(res, 0.4) == (0.0, 1.0, 1.0)
    assert block_trajectory(res, 0.2) == (0.0, 0.0, 0.0)


def test_merge_from_the_left():
    arrivals = [Arrival(0.1, -2.0, 1.0), Arrival(0.2, 0.0, 1.0), Arrival(0.3, -1.5, 1.0)]
    res = run(SMALL, arrivals=arrivals)
    assert res.covering.intervals == [(-2.0, 1.0)]
    first, second = res.jump_log
    assert (first.T, first.G, first.D, first.R) == (0.2, 0.0, 1.0, 1.0)
    # the third file exactly fills [-1, 0): g moves, nothing goes over 0
    assert (second.T, second.G, second.D, second.R, second.kind) == (0.3, 2.0, 0.0, 0.0, "merge")


def test_on_block_growth_and_untouched_arrivals():
    arrivals = [Arrival(0.1, -0.5, 1.0), Arrival(0.2, 0.1, 0.5), Arrival(0.3, 3.0, 1.0)]
    res = run(SMALL, arrivals=arrivals)
    assert len(res.jump_log) == 1
    assert res.on_block_growth == [(0.2, 0.5)]
    assert block_trajectory(res, 0.5) == (-0.5, 1.0, 1.5)


def test_query_past_end():
    res = run(SMALL, arrivals=[])
    with pytest.raises(QueryPastEnd):
        block_trajectory(res, 0.6)


def test_invalid_when_block_reaches_margin():
    cfg = SimConfig(Dirac(1.0), 0.5, 10.0, 8.0)
    res = run(cfg, arrivals=[Arrival(0.1, -1.0, 4.0)])
    assert not res.valid
    assert "interior" in res.invalidation_reason
    with pytest.raises(ValueError):
        block_trajectory(res, 0.2)


def _random_results(n=60):
    for k in range(n):
        nu = [Dirac(1.0), Exponential(1.0), Gamma(2.0, 0.4), FiniteDiscrete((0.5, 1.0), (1.0, 1.0))][k % 4]
        cfg = SimConfig(nu, 0.7 / nu.mean(), 25.0, 4.0, seed=k, trace_times=(0.2 / nu.mean(), 0.45 / nu.mean(), 0.7 / nu.mean()))
        yield cfg, run(cfg, k)


def test_result_invariants():
    seen = 0
    for cfg, res in _random_results():
        if not res.valid:
            continue
        seen += 1
        arrivals = generate_arrivals(cfg, replica_rng(cfg.seed, res.replica))
        total = sum(a.l for a in arrivals)
        assert res.covering.covered_length() == pytest.approx(total - res.spilled, abs=1e-9)
        g = [r[1] for r in res.block_trace]
        d = [r[2] for r in res.block_trace]
        assert all(np.diff(g) <= 0) and all(np.diff(d) >= 0)
        T = [j.T for j in res.jump_log]
        assert all(np.diff(T) > 0)
        sizes = {a.t: a.l for a in arrivals}
        for j in res.jump_log:
            assert j.L == j.G + j.D and j.G >= 0 and j.D >= 0
            assert 0 <= j.R <= sizes[j.T]
        # jumps of g in the trace are exactly the logged jumps
        g_jumps = [(r1[0], r0[1] - r1[1]) for r0, r1 in zip(res.block_trace, res.block_trace[1:]) if r1[1] != r0[1]]
        logged = [(j.T, j.G) for j in res.jump_log if j.G > 0]
        assert g_jumps == logged
    assert seen > 40


def test_engine_matches_oracle_at_trace_times():
    for cfg, res in _random_results(40):
        if not res.valid:
            continue
        arrivals = generate_arrivals(cfg, replica_rng(cfg.seed, res.replica))
        for s in res.samples:
            cov = covering_from_path(build_path(arrivals, s.t, cfg.half_width))
            blk = cov.block_at(0.0) or (0.0, 0.0)
            assert (s.g, s.d) == pytest.approx(blk, abs=1e-9)
        final = covering_from_path(build_path(arrivals, cfg.t_end, cfg.half_width))
        assert len(final) == len(res.covering)
        assert np.allclose(final.starts, res.covering.starts, atol=1e-9, rtol=0)
        assert np.allclose(final.ends, res.covering.ends, atol=1e-9, rtol=0)


@pytest.mark.parametrize(
    "nu", [Dirac(1.0), Exponential(1.0), Gamma(0.7, 1.3), FiniteDiscrete((0.5, 1.0, 1.5), (1.0, 1.0, 1.0))], ids=lambda v: v.to_text()
)
def test_batch_kernel_reproduces_reference_run(nu):
    cfg = SimConfig(nu, 0.6 / nu.mean(), 30.0, 5.0, seed=9, trace_times=(0.1, 0.3 / nu.mean(), 0.6 / nu.mean()))
    batch = simulate_batch(cfg, 40)
    for k in range(40):
        res = run(cfg, k)
        assert bool(batch.valid[k]) == res.valid
        assert batch.n_arrivals[k] == res.n_arrivals
        if not res.valid:
            continue
        m = batch.jump_replica == k
        ref = np.array([(j.T, j.G, j.D, j.R) for j in res.jump_log]).reshape(-1, 4)
        got = np.column_stack([batch.T[m], batch.G[m], batch.D[m], batch.R[m]])
        assert np.array_equal(ref, got)
        assert [("left_spill", "merge")[c] for c in batch.kind[m]] == [j.kind for j in res.jump_log]
        samples = np.array([(s.g, s.d, s.l, s.uncovered_fraction) for s in res.samples])
        assert np.array_equal(samples, batch.trace[k])
        assert batch.n_growth[k] == len(res.on_block_growth)
        assert batch.spilled[k] == res.spilled


def test_batch_merge_is_order_independent():
    cfg = SimConfig(Exponential(1.0), 0.5, 30.0, 5.0, seed=4, trace_times=(0.5,))
    whole = simulate_batch(cfg, 60)
    rng = np.random.default_rng(0)
    for _ in range(5):
        perm = rng.permutation(60)
        parts = np.array_split(perm, 4)
        batches = [simulate_batch(cfg, np.sort(p)) for p in parts]
        a = batches[0].merge(batches[1]).merge(batches[2].merge(batches[3]))
        b = batches[3].merge(batches[0]).merge(batches[2]).merge(batches[1])
        for other in (a, b):
            for name in ("replica", "valid", "trace", "jump_replica", "jump_i", "T", "G", "D", "R", "kind"):
                assert np.array_equal(getattr(other, name), getattr(whole, name), equal_nan=name == "trace")
    with pytest.raises(ValueError):
        whole.merge(whole)


def test_mean_jump_count():
    cfg = SimConfig(Dirac(1.0), 0.5, 200.0, 40.0, seed=21)
    batch = simulate_batch(cfg, 10_000)
    good = batch.replica[batch.valid]
    counts = np.bincount(np.searchsorted(good, batch.jump_replica[batch.valid_jumps()]), minlength=good.size)
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - math.log(2)) < 3 * se


def test_remaining_data_independent_of_time():
    cfg = SimConfig(Dirac(1.0), 0.5, 200.0, 40.0, seed=22)
    batch = simulate_batch(cfg, 15_000)
    m = batch.valid_jumps() & (batch.kind == 0)
    assert m.sum() >= 10_000
    assert abs(rank_correlation(batch.R[m], batch.T[m])) < 0.05


def test_free_fraction():
    cfg = SimConfig(Dirac(1.0), 0.5, 200.0, 40.0, seed=23, trace_times=(0.5,))
    batch = simulate_batch(cfg, 100)
    assert batch.valid.all()
    assert abs(batch.trace[:, 0, 3].mean() - 0.5) < 0.01


def test_json_round_trip():
    cfg = SimConfig(Exponential(1.0), 0.5, 20.0, 3.0, seed=1, trace_times=(0.25, 0.5))
    res = run(cfg, 2)
    text = res.to_json()
    doc = json.loads(text)
    assert doc["schema_version"] == 1
    back = SimResult.from_dict(doc)
    assert back.to_json() == text
    assert back.config == cfg
    with pytest.raises(ValueError):
        SimResult.from_dict({**doc, "schema_version": 2})


def test_csv_jump_log():
    cfg = SimConfig(Dirac(1.0), 0.5, 20.0, 3.0, seed=1)
    results = [run(cfg, k) for k in range(5)]
    lines = jump_log_csv(results).splitlines()
    assert lines[0] == "replica,i,T,G,D,R,L,kind"
    assert len(lines) == 1 + sum(len(r.jump_log) for r in results)
    batch = simulate_batch(cfg, 5)
    assert batch.to_csv() == jump_log_csv([r for r in results if r.valid])
