import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tierblocks.baselines import TableTooLargeError, curve_blocks, key_order_blocks, kdtree_blocks, tuple_baseline
from tierblocks.core import Query, Table, satisfying_mask
from tierblocks.layout import METHODS, LayoutConfig, build_layout
from tierblocks.router import UnknownBlockError, apply_placement, route_query
from tierblocks.spatial import tree_from_manifest, tree_to_manifest
from tierblocks.synthetic import clustered_table
from tierblocks.workloadgen import gen_representative


@pytest.fixture(scope="module")
def setup():
    table = clustered_table(3000, 3, seed=0)
    reps = gen_representative(table, 20, seed=1)
    cfg = LayoutConfig(block_size=120, page_size=20, leaf_scan_threshold=8)
    layouts = {m: build_layout(table, m, reps, cfg, seed=0) for m in METHODS}
    return table, reps, layouts


def random_query(rng, d):
    cols = rng.choice(d, size=int(rng.integers(1, d + 1)), replace=False)
    bounds = []
    for c in sorted(cols):
        lo = float(rng.random() * 0.9)
        bounds.append((int(c), lo, lo + float(rng.random() * (1 - lo))))
    return Query(tuple(bounds))


@pytest.mark.parametrize("method", METHODS)
def test_blocks_partition_and_respect_capacity(setup, method):
    table, _, layouts = setup
    f = layouts[method].forest
    f.check()
    cap = 1 if method == "tuple" else 120
    assert f.sizes.max() <= cap


@pytest.mark.parametrize("method", METHODS)
def test_routing_is_complete(setup, method):
    table, _, layouts = setup
    f = layouts[method].forest
    rng = np.random.default_rng(7)
    for _ in range(40):
        q = random_query(rng, table.d)
        blocks = route_query(f, q)
        rows = np.concatenate([f.blocks[b].rows for b in blocks]) if blocks.size else np.empty(0, int)
        got = np.sort(rows[satisfying_mask(q, table.values[rows])])
        assert np.array_equal(got, np.flatnonzero(satisfying_mask(q, table.values)))
        assert f.answer(q).total == got.size


@pytest.mark.parametrize("method", ["brame-s", "brame-h", "kdtree"])
def test_scan_and_descend_agree(setup, method):
    table, _, layouts = setup
    f = layouts[method].forest
    rng = np.random.default_rng(3)
    for _ in range(30):
        q = random_query(rng, table.d)
        a = route_query(f, q, 0)
        assert np.array_equal(a, route_query(f, q, 10 ** 9))
        assert np.array_equal(a, route_query(f, q))


def test_routed_blocks_meet_query(setup):
    table, reps, layouts = setup
    f = layouts["brame-s"].forest
    for q in reps:
        for b in route_query(f, q):
            lo, hi = q.box(table.d)
            m = f.blocks[b].mbr
            assert np.all(m.mins < hi) and np.all(m.maxs > lo)


def test_apply_placement(setup):
    _, _, layouts = setup
    f = layouts["kdtree"].forest
    f.reset_state()
    assert apply_placement(f, [0, 2]) == 2
    assert apply_placement(f, [2]) == 1
    assert f.edge_ids().tolist() == [2]
    with pytest.raises(UnknownBlockError):
        apply_placement(f, [f.n_blocks])
    f.check()


def test_baseline_shapes():
    t = Table.from_array(np.array([[0.5, 0.1], [0.2, 0.9], [0.5, 0.0], [0.9, 0.9], [0.1, 0.1]]))
    assert [l.rows.tolist() for l in key_order_blocks(t, 2).leaves] == [[4, 1], [2, 0], [3]]
    assert sorted(np.concatenate([l.rows for l in curve_blocks(t, 2).leaves]).tolist()) == list(range(5))
    assert all(l.rows.size <= 2 for l in kdtree_blocks(t, 2).leaves)
    assert tuple_baseline(t).n_leaves == 5
    with pytest.raises(TableTooLargeError):
        tuple_baseline(t, max_rows=4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30))
def test_key_order_blocks_are_sorted_runs(seed, bs):
    vals = np.random.default_rng(seed).random((100, 2))
    leaves = key_order_blocks(Table.from_array(vals), bs).leaves
    order = np.concatenate([l.rows for l in leaves])
    keys = [tuple(vals[i]) for i in order]
    assert keys == sorted(keys)
    assert all(l.rows.size == bs for l in leaves[:-1])


@pytest.mark.parametrize("method", ["brame-s", "kdtree", "key-order"])
def test_manifest_round_trip(setup, method):
    _, _, layouts = setup
    for tree in layouts[method].forest.trees:
        doc = tree_to_manifest(tree)
        back = tree_from_manifest(doc)
        assert tree_to_manifest(back) == doc
        assert [l.rows.tolist() for l in back.leaves] == [l.rows.tolist() for l in tree.leaves]


def test_manifest_rejects_unknown_version(setup):
    _, _, layouts = setup
    doc = tree_to_manifest(layouts["kdtree"].forest.trees[0])
    doc["version"] = 99
    with pytest.raises(ValueError):
        tree_from_manifest(doc)


def test_unknown_method(setup):
    table, reps, _ = setup
    with pytest.raises(ValueError):
        build_layout(table, "zorder", reps)
