import numpy as np
import pytest

from tierblocks.core import Query
from tierblocks.layout import LayoutConfig, build_layout
from tierblocks.metrics import bhr_sets, thr_sets
from tierblocks.sim import (METRIC_COLUMNS, SimConfig, bench_build, metrics_csv, read_metrics_csv, run_cloud_edge,
                            run_three_tier)
from tierblocks.synthetic import clustered_table
from tierblocks.workloadgen import TimedWorkload, assemble, gen_arrival_curves, gen_representative


@pytest.fixture(scope="module")
def world():
    table = clustered_table(4000, 3, seed=0)
    reps = gen_representative(table, 20, seed=1)
    curves = gen_arrival_curves(reps, 6, 0.5, seed=2, rate_scale=1.0)
    train, test = assemble(reps, curves, 0.05, seed=3)
    return table, reps, train, test


def layout(world, method="kdtree"):
    table, reps, _, _ = world
    return build_layout(table, method, reps, LayoutConfig(block_size=100, page_size=25), seed=0)


def test_metric_examples():
    q = Query(((0, 0.0, 1.0),))
    vals = np.array([[0.1], [0.2], [0.3], [0.4]])
    rows = {0: np.array([0, 1]), 1: np.array([2, 3])}
    assert thr_sets(q, [0, 1], [0], rows, vals) == 0.5
    assert bhr_sets([0, 1], [0]) == 0.5
    assert bhr_sets([], [0]) is None


def test_cloud_edge_monotone_in_budget(world):
    _, _, train, test = world
    _, summ = run_cloud_edge(layout(world), train, test, (0.0, 0.1, 0.3, 1.0))
    thrs = [s.thr for s in summ]
    assert thrs[0] == 0.0 and thrs[-1] == pytest.approx(1.0)
    assert all(b >= a - 1e-9 for a, b in zip(thrs, thrs[1:]))


def test_cloud_edge_logs_migrations(world):
    _, _, train, test = world
    log = []
    samples, _ = run_cloud_edge(layout(world), train, test, (0.1,), log=log)
    assert len(log) == test.n_intervals == len(samples)
    assert all(frac == 0.1 for frac, _ in log)


def test_three_tier_full_capacity_only_cold_misses(world):
    _, _, train, test = world
    L = layout(world)
    _, summ = run_three_tier(L, train, test, (1.0,), SimConfig(policy="lru"))
    distinct = {int(b) for q in test.queries() for b in L.forest.answer(q).blocks}
    assert summ[0].extra["misses"] == len(distinct)


@pytest.mark.parametrize("policy", ["lru", "lfu", "clock", "arc"])
def test_three_tier_runs_each_policy(world, policy):
    _, _, train, test = world
    _, summ = run_three_tier(layout(world), train, test, (0.0, 0.05), SimConfig(policy=policy))
    assert summ[0].thr == 0.0
    assert 0.0 <= summ[1].thr <= 1.0


def test_simulation_is_deterministic(world):
    _, _, train, test = world
    a = metrics_csv(run_cloud_edge(layout(world, "brame-s"), train, test, (0.05, 0.2))[0])
    b = metrics_csv(run_cloud_edge(layout(world, "brame-s"), train, test, (0.05, 0.2))[0])
    assert a == b
    rows = read_metrics_csv(a)
    assert tuple(rows[0]) == METRIC_COLUMNS


def test_empty_intervals_are_tolerated(world):
    _, _, train, _ = world
    _, summ = run_cloud_edge(layout(world), train, TimedWorkload([[], []]), (0.1,))
    assert summ[0].thr is None and summ[0].queries == 0


def test_bench_reports_phases(world):
    table, reps, _, _ = world
    rows = bench_build(table, ["key-order", "brame-s"], reps, LayoutConfig(block_size=100, page_size=25), repeats=1)
    assert rows[0].method == "key-order" and rows[0].seconds > 0
    assert {"presegment", "hbc"} <= set(rows[1].phases)
