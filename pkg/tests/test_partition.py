import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tierblocks.core import MBR, Query, Table, satisfying_mask
from tierblocks.partition import (COLD, HOT, Page, PartitionConfig, Zone, cluster_hot, encode_pages, filter_hard,
                                  filter_soft, label_zones, merge_zones, partition_table, presegment,
                                  reorganize_cold, split_zone)
from tierblocks.reorg import ReorgConfig


def page(i, heat, nq=8, rows=None, pos=None):
    f = np.zeros(nq, dtype=np.uint8)
    f[:heat] = 1
    rows = np.array([i]) if rows is None else rows
    return Page(i, rows, MBR(np.zeros(1), np.ones(1)), f, i if pos is None else pos)


def kinds(zones):
    return [(z.kind, z.n_pages) for z in zones]


def test_presegment_pages_partition_rows():
    vals = np.random.default_rng(0).random((1000, 3))
    pages = presegment(vals, 50)
    rows = np.concatenate([p.rows for p in pages])
    assert sorted(rows.tolist()) == list(range(1000))
    assert all(p.size < 100 for p in pages)
    with pytest.raises(ValueError):
        presegment(vals, 0)


def test_encode_pages_marks_meeting_queries():
    vals = np.array([[0.1, 0.1], [0.2, 0.2], [0.8, 0.8], [0.9, 0.9]])
    pages = [Page(0, np.array([0, 1]), MBR(vals[0], vals[1])), Page(1, np.array([2, 3]), MBR(vals[2], vals[3]))]
    encode_pages(pages, [Query(((0, 0.0, 0.5),)), Query(((1, 0.5, 1.0),)), Query.full(2)])
    assert pages[0].features.tolist() == [1, 0, 1] and pages[1].features.tolist() == [0, 1, 1]
    with pytest.raises(ValueError):
        encode_pages(pages, [])


def test_filter_hard():
    pages = [page(0, 3), page(1, 0), page(2, 1)]
    hot, cold = filter_hard(pages, 1)
    assert [p.page_id for p in hot] == [0, 2] and [p.page_id for p in cold] == [1]


def test_soft_merges_small_gap():
    hot, cold, _ = filter_soft([page(0, 2), page(1, 0), page(2, 2)], 1, 2)
    assert kinds(hot) == [(HOT, 3)] and cold == []


def test_soft_keeps_large_gap():
    pages = [page(0, 2)] + [page(i, 0) for i in range(1, 6)] + [page(6, 2)]
    _, cold, zones = filter_soft(pages, 1, 2)
    assert kinds(zones) == [(HOT, 1), (COLD, 5), (HOT, 1)] and len(cold) == 5


def test_soft_all_cold():
    hot, cold, _ = filter_soft([page(i, 0) for i in range(4)], 1, 2)
    assert hot == [] and len(cold) == 4


def test_zones_follow_curve_position():
    pages = [page(0, 1, pos=5), page(1, 0, pos=1), page(2, 1, pos=0)]
    assert [z.page_ids for z in label_zones(pages, 1)] == [[2], [1], [0]]


heats = st.lists(st.integers(0, 4), min_size=1, max_size=40)


@settings(max_examples=100, deadline=None)
@given(heats, st.integers(0, 3), st.integers(0, 4))
def test_soft_never_drops_hot_pages_and_merge_is_idempotent(hs, limit, thresh):
    pages = [page(i, h) for i, h in enumerate(hs)]
    hot, cold, zones = filter_soft(pages, limit, thresh)
    cold_ids = {p.page_id for p in cold}
    assert all(p.heat < limit for p in cold)
    assert cold_ids | {p.page_id for z in hot for p in z.pages} == set(range(len(hs)))
    assert kinds(merge_zones(zones, thresh)) == kinds(zones)


def test_split_zone_bounds_pieces():
    rng = np.random.default_rng(0)
    pages = [Page(i, np.array([i]), MBR(np.zeros(1), np.ones(1)), rng.integers(0, 2, 6).astype(np.uint8), i)
             for i in range(60)]
    parts = split_zone(pages, 20, ReorgConfig(), seed=0)
    assert len(parts) >= 2 and all(len(p) <= 20 for p in parts)
    assert sorted(p.page_id for part in parts for p in part) == list(range(60))


def test_split_zone_skewed_chunks_along_curve():
    pages = [page(i, 2) for i in range(9)]
    parts = split_zone(pages, 3, ReorgConfig(), seed=0)
    assert [[p.page_id for p in part] for part in parts] == [[0, 1, 2], [3, 4, 5], [6, 7, 8]]


def test_cluster_hot_hard_two_groups():
    pages = []
    for i in range(8):
        f = np.array([1, 1, 0, 0] if i < 4 else [0, 0, 1, 1], dtype=np.uint8)
        pages.append(Page(i, np.array([i]), MBR(np.zeros(1), np.ones(1)), f, i))
    subs = cluster_hot(pages, "hard", PartitionConfig(hard_k=2, reorg=ReorgConfig(phi=0.0)), seed=0)
    assert sorted(s.tolist() for s in subs) == [[0, 1, 2, 3], [4, 5, 6, 7]]


def test_cluster_hot_soft_small_zone_single_subtable():
    z = Zone(HOT, 0, 3, [page(i, 1) for i in range(3)])
    assert [s.tolist() for s in cluster_hot([z], "soft", PartitionConfig())] == [[0, 1, 2]]
    with pytest.raises(ValueError):
        cluster_hot([z], "medium", PartitionConfig())


def test_reorganize_cold():
    vals = np.random.default_rng(0).random((500, 2))
    assert reorganize_cold(vals, [], 100).root is None
    one = reorganize_cold(vals, [Page(0, np.arange(40), MBR(np.zeros(2), np.ones(2)))], 100)
    assert one.n_leaves == 1
    tree = reorganize_cold(vals, [Page(0, np.arange(500), MBR(np.zeros(2), np.ones(2)))], 100)
    assert tree.n_leaves >= 3 and all(l.rows.size <= 100 for l in tree.leaves)
    assert sorted(np.concatenate([l.rows for l in tree.leaves]).tolist()) == list(range(500))


@pytest.fixture(scope="module")
def table():
    return Table.from_array(np.random.default_rng(3).random((4000, 2)))


def test_zero_limit_has_no_cold_rows(table):
    out = partition_table(table, [Query(((0, 0.0, 0.1),))], 200, PartitionConfig(page_size=50, freq_limit=0))
    assert out.cold_rows == 0 and out.hot_rows == table.n


@pytest.mark.parametrize("mode", ["hard", "soft"])
def test_left_half_workload_leaves_right_half_cold(table, mode):
    qs = [Query(((0, 0.0, 0.5),))]
    out = partition_table(table, qs, 200, PartitionConfig(page_size=50, freq_limit=1, filter=mode,
                                                          size_threshold=0))
    cold = np.concatenate([p.rows for p in out.cold_pages])
    touched = satisfying_mask(qs[0], table.values)
    assert not touched[cold].any()
    assert (table.values[cold, 0] > 0.5).mean() > 0.9
    rows = np.concatenate(out.subtables + [cold])
    assert sorted(rows.tolist()) == list(range(table.n))


def test_partition_deterministic_and_report(table):
    qs = [Query(((0, a, a + 0.2),)) for a in (0.1, 0.3, 0.6)]
    cfg = PartitionConfig(page_size=40, max_subtable=10)
    a = partition_table(table, qs, 200, cfg, seed=4)
    b = partition_table(table, qs, 200, cfg, seed=4)
    assert [s.tolist() for s in a.subtables] == [s.tolist() for s in b.subtables]
    rep = a.report()
    assert rep["hot_rows"] + rep["cold_rows"] == table.n
    assert max(len(s) for s in a.subtables) <= 10 * 80
