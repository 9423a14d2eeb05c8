import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tierblocks.core import Query, Table
from tierblocks.layout import LayoutConfig, build_layout
from tierblocks.scheduler import (HeatState, KnapsackInstance, migrate_period, period_driver, place,
                                  solve_knapsack, solve_knapsack_dp, solve_knapsack_greedy, update_heat,
                                  update_heats)


def brute_force(sizes, values, budget):
    best = 0.0
    for r in range(len(sizes) + 1):
        for combo in itertools.combinations(range(len(sizes)), r):
            if sum(sizes[i] for i in combo) <= budget:
                best = max(best, sum(values[i] for i in combo))
    return best


def test_heat_single_step():
    assert update_heat(HeatState(1.0, 5), 0.6).heat == pytest.approx(2.6, abs=1e-12)


def test_heat_sequence():
    h = HeatState(1.0)
    out = []
    for hits in (5, 0, 2):
        h = update_heat(HeatState(h.heat, hits), 0.6)
        out.append(h.heat)
    assert out == pytest.approx([2.6, 1.56, 1.736], abs=1e-12)


def test_heat_gamma_limits():
    assert update_heat(HeatState(3.0, 7), 0.0).heat == 7.0
    assert update_heat(HeatState(3.0, 7), 1.0).heat == 3.0


def test_heat_rejects_bad_gamma():
    with pytest.raises(ValueError):
        update_heats(np.zeros(2), np.zeros(2), 1.5)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 100), st.lists(st.integers(0, 20), min_size=1, max_size=30), st.floats(0, 1))
def test_heat_bounded_by_max_of_start_and_hits(h0, hits, gamma):
    h = h0
    for x in hits:
        h = gamma * h + (1 - gamma) * x
        assert 0 <= h <= max(h0, max(hits)) + 1e-9


def test_knapsack_example_heats():
    plan = solve_knapsack(KnapsackInstance(2, [1, 1, 1], [5, 1, 3]))
    assert plan.selected == {0, 2}


def test_knapsack_budget_edges():
    inst = KnapsackInstance(0, [1, 2], [3.0, 4.0])
    assert solve_knapsack_dp(inst).selected == frozenset()
    inst = KnapsackInstance(10, [1, 2], [3.0, 4.0])
    assert solve_knapsack_dp(inst).selected == {0, 1}


def test_knapsack_classic_instance():
    # sizes 1,3,4,5 values 1,4,5,7 budget 7 -> best is items 1 and 2 (value 9)
    plan = solve_knapsack_dp(KnapsackInstance(7, [1, 3, 4, 5], [1, 4, 5, 7]))
    assert plan.value == 9 and plan.selected == {1, 2}


def test_knapsack_ids_are_returned():
    plan = solve_knapsack_dp(KnapsackInstance(1, [1, 1], [1.0, 2.0], ids=[10, 20]))
    assert plan.selected == {20}


def test_knapsack_rejects_bad_input():
    with pytest.raises(ValueError):
        KnapsackInstance(3, [0], [1.0])
    with pytest.raises(ValueError):
        KnapsackInstance(3, [1], [-1.0])
    with pytest.raises(ValueError):
        solve_knapsack(KnapsackInstance(3, [1], [1.0]), "magic")


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10_000))
def test_dp_matches_enumeration_and_greedy_half(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 13))
    sizes = rng.integers(1, 20, n).tolist()
    values = np.round(rng.random(n) * 10, 3).tolist()
    budget = int(rng.integers(0, sum(sizes) + 1))
    inst = KnapsackInstance(budget, sizes, values)
    opt = brute_force(sizes, values, budget)
    dp = solve_knapsack_dp(inst)
    greedy = solve_knapsack_greedy(inst)
    assert dp.used <= budget and greedy.used <= budget
    assert dp.value == pytest.approx(opt, abs=1e-9)
    assert greedy.value >= 0.5 * opt - 1e-9


@pytest.fixture(scope="module")
def small_layout():
    rng = np.random.default_rng(0)
    table = Table.from_array(rng.random((2000, 3)))
    qs = [Query(((0, a, a + 0.2), (1, b, b + 0.3))) for a, b in rng.random((20, 2)) * 0.7]
    return build_layout(table, "kdtree", qs, LayoutConfig(block_size=100)), qs


def test_place_respects_budget_and_prefers_heat(small_layout):
    layout, qs = small_layout
    forest = layout.forest
    forest.reset_state()
    forest.heat[:] = 0
    forest.heat[[3, 7]] = [5.0, 2.0]
    plan, stats = place(forest, int(forest.sizes[3]) + int(forest.sizes[7]))
    assert plan.selected == {3, 7}
    assert stats.blocks_to_edge == 2 and stats.blocks_to_cloud == 0
    assert set(forest.edge_ids()) == {3, 7}
    forest.check()


def test_migration_never_exceeds_budget_and_keeps_results(small_layout):
    layout, qs = small_layout
    forest = layout.forest
    forest.reset_state()
    before = {q: forest.answer(q) for q in qs}
    budget = 450
    batches = [qs[:5], qs[5:12], qs[12:], qs[:3]]
    result = period_driver(batches, forest, 0.6, budget)
    assert len(result.metrics) == 4
    for plan in result.plans:
        assert sum(int(forest.sizes[b]) for b in plan.selected) <= budget
    forest._answers.clear()
    for q in qs:
        after = forest.answer(q)
        assert np.array_equal(before[q].blocks, after.blocks)
        assert np.array_equal(before[q].matches, after.matches)


def test_migrate_period_moves_toward_hot_blocks(small_layout):
    layout, qs = small_layout
    forest = layout.forest
    forest.reset_state()
    _, stats = migrate_period([qs[0]] * 10, forest, 0.6, 300)
    routed = set(forest.answer(qs[0]).blocks.tolist())
    assert set(forest.edge_ids()) <= routed
    assert stats.blocks_to_edge == len(forest.edge_ids())
    assert stats.tuples_moved == int(forest.sizes[forest.edge_ids()].sum())
