"""Page-level table partitioning: pre-segmentation, page encoding, hot/cold
filtering, hot-zone clustering into sub-tables and cold-page reorganization."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import MBR, Query, Table, intersects_many
from .reorg import ReorgConfig, balanced_kmeans, detect_skew, dynamic_adjust_k, lexicographic
from .spatial import Tree, hilbert_keys, kdtree_build

HOT = "hot"
COLD = "cold"


@dataclass
class PartitionConfig:
    page_size: int = 512
    freq_limit: int = 1
    size_threshold: int = 2
    filter: str = "soft"
    max_subtable: int = 4096
    hard_k: int | None = None
    reorg: ReorgConfig = field(default_factory=ReorgConfig)


@dataclass(eq=False)
class Page:
    page_id: int
    rows: np.ndarray
    mbr: MBR
    features: np.ndarray | None = None
    position: int = 0

    @property
    def heat(self) -> int:
        return 0 if self.features is None else int(self.features.sum())

    @property
    def size(self) -> int:
        return int(self.rows.shape[0])


@dataclass
class Zone:
    kind: str
    start: int
    stop: int
    pages: list[Page]

    @property
    def n_pages(self) -> int:
        return self.stop - self.start

    @property
    def page_ids(self) -> list[int]:
        return [p.page_id for p in self.pages]


@dataclass
class PartitionOutput:
    subtables: list[np.ndarray]
    cold_tree: Tree
    pages: list[Page]
    zones: list[Zone]
    hot_pages: list[Page]
    cold_pages: list[Page]
    config: PartitionConfig
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def hot_rows(self) -> int:
        return int(sum(s.size for s in self.subtables))

    @property
    def cold_rows(self) -> int:
        return int(sum(p.size for p in self.cold_pages))

    def report(self) -> dict:
        cfg = self.config
        return {
            "filter": cfg.filter,
            "page_size": cfg.page_size,
            "freq_limit": cfg.freq_limit,
            "size_threshold": cfg.size_threshold,
            "max_subtable": cfg.max_subtable,
            "pages": len(self.pages),
            "hot_pages": len(self.hot_pages),
            "cold_pages": len(self.cold_pages),
            "hot_rows": self.hot_rows,
            "cold_rows": self.cold_rows,
            "subtables": [int(s.size) for s in self.subtables],
            "zones": [{"kind": z.kind, "start": z.start, "pages": z.n_pages} for z in self.zones],
            "cold_blocks": self.cold_tree.n_leaves,
        }


def presegment(values: np.ndarray, page_size: int) -> list[Page]:
    """KD-tree (max-variance median splits) leaves as pages of < 2*page_size rows."""
    if page_size < 1:
        raise ValueError("page_size must be >= 1")
    tree = kdtree_build(values, None, page_size, "max-variance", stop="presegment")
    pages = [Page(i, leaf.rows, leaf.mbr) for i, leaf in enumerate(tree.leaves)]
    if pages:
        centers = np.stack([p.mbr.center() for p in pages])
        for p, key in zip(pages, hilbert_keys(centers)):
            p.position = int(key)
    return pages


def encode_pages(pages: Sequence[Page], workload: Sequence[Query]) -> list[Page]:
    """Bit j of a page is set iff query j meets the page's MBR."""
    if len(workload) == 0:
        raise ValueError("workload must be non-empty")
    if not pages:
        return list(pages)
    mins = np.stack([p.mbr.mins for p in pages])
    maxs = np.stack([p.mbr.maxs for p in pages])
    F = np.zeros((len(pages), len(workload)), dtype=np.uint8)
    for j, q in enumerate(workload):
        F[:, j] = intersects_many(q, mins, maxs)
    for p, row in zip(pages, F):
        p.features = row
    return list(pages)


def filter_hard(pages: Sequence[Page], freq_limit: int) -> tuple[list[Page], list[Page]]:
    if freq_limit < 0:
        raise ValueError("freq_limit must be >= 0")
    hot = [p for p in pages if p.heat >= freq_limit]
    cold = [p for p in pages if p.heat < freq_limit]
    return hot, cold


def label_zones(pages: Sequence[Page], freq_limit: int) -> list[Zone]:
    """First scan: order pages along the Hilbert curve and coalesce same-label runs."""
    seq = sorted(pages, key=lambda p: (p.position, p.page_id))
    zones: list[Zone] = []
    for i, p in enumerate(seq):
        kind = HOT if p.heat >= freq_limit else COLD
        if zones and zones[-1].kind == kind:
            zones[-1].pages.append(p)
            zones[-1].stop = i + 1
        else:
            zones.append(Zone(kind, i, i + 1, [p]))
    return zones


def merge_zones(zones: Sequence[Zone], size_threshold: int) -> list[Zone]:
    """Second scan: a cold zone of at most ``size_threshold`` pages between two
    hot zones is absorbed together with both neighbours into one hot zone."""
    out: list[Zone] = []
    for i, z in enumerate(zones):
        between = 0 < i < len(zones) - 1 and zones[i - 1].kind == HOT and zones[i + 1].kind == HOT
        if z.kind == COLD and between and z.n_pages <= size_threshold:
            out[-1] = Zone(HOT, out[-1].start, z.stop, out[-1].pages + z.pages)
            continue
        if z.kind == HOT and out and out[-1].kind == HOT:
            out[-1] = Zone(HOT, out[-1].start, z.stop, out[-1].pages + z.pages)
            continue
        out.append(Zone(z.kind, z.start, z.stop, list(z.pages)))
    return out


def filter_soft(pages: Sequence[Page], freq_limit: int, size_threshold: int) -> tuple[list[Zone], list[Page], list[Zone]]:
    """Returns ``(hot zones, cold pages, all zones)`` after the two scans."""
    if freq_limit < 0 or size_threshold < 0:
        raise ValueError("thresholds must be >= 0")
    zones = merge_zones(label_zones(pages, freq_limit), size_threshold)
    hot = [z for z in zones if z.kind == HOT]
    cold = [p for z in zones if z.kind == COLD for p in z.pages]
    return hot, cold, zones


def _position_rank(pages: Sequence[Page]) -> np.ndarray:
    rank = np.empty(len(pages), dtype=np.int64)
    rank[np.lexsort(([p.page_id for p in pages], [p.position for p in pages]))] = np.arange(len(pages))
    return rank


def _chunk(pages: list[Page], max_pages: int) -> list[list[Page]]:
    seq = sorted(pages, key=lambda p: (p.position, p.page_id))
    n = math.ceil(len(seq) / max_pages)
    return [list(part) for part in np.array_split(np.array(seq, dtype=object), n)]


def split_zone(pages: list[Page], max_pages: int, cfg: ReorgConfig, seed: int = 0) -> list[list[Page]]:
    """Iteratively cluster an oversized zone by page features until every piece
    holds at most ``max_pages`` pages; skewed pieces are cut along the curve."""
    done: list[list[Page]] = []
    queue = [pages]
    step = 0
    while queue:
        group = queue.pop(0)
        if len(group) <= max_pages:
            done.append(group)
            continue
        step += 1
        k = min(dynamic_adjust_k(len(group), max_pages, cfg.fanout_target, cfg.k_max), len(group))
        F = np.stack([p.features for p in group])
        parts = None
        if not detect_skew(F, k, cfg.skew_tau):
            res = balanced_kmeans(F, k, cfg.phi, cfg.max_iter, seed + step, _position_rank(group))
            parts = [[group[i] for i in np.flatnonzero(res.labels == j)] for j in range(res.k)]
            parts = [p for p in parts if p]
            if len(parts) < 2:
                parts = None
        if parts is None:
            done.extend(_chunk(group, max_pages))
        else:
            queue.extend(parts)
    return done


def _rows(pages: Sequence[Page]) -> np.ndarray:
    if not pages:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate([p.rows for p in pages]))


def cluster_hot(hot: Sequence, mode: str, cfg: PartitionConfig, seed: int = 0) -> list[np.ndarray]:
    """Group hot pages into sub-tables (row-id arrays).

    ``mode="hard"`` takes hot pages and clusters them by feature vector;
    ``mode="soft"`` takes hot zones and only splits the oversized ones.
    """
    if mode == "hard":
        pages = list(hot)
        if not pages:
            return []
        k = cfg.hard_k or max(2, math.ceil(len(pages) / cfg.max_subtable))
        k = min(k, len(pages))
        if k <= 1:
            return [_rows(pages)]
        F = np.stack([p.features for p in pages])
        res = balanced_kmeans(F, k, cfg.reorg.phi, cfg.reorg.max_iter, seed, _position_rank(pages))
        groups = [[pages[i] for i in np.flatnonzero(res.labels == j)] for j in range(res.k)]
        return [_rows(g) for g in groups if g]
    if mode == "soft":
        out = []
        for zi, zone in enumerate(hot):
            for part in split_zone(list(zone.pages), cfg.max_subtable, cfg.reorg, seed + 7919 * zi):
                out.append(_rows(part))
        return out
    raise ValueError(f"unknown filter mode {mode!r}")


def reorganize_cold(values: np.ndarray, cold_pages: Sequence[Page], block_size: int) -> Tree:
    """Pool cold rows and cut them into cloud blocks with a KD-tree index."""
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    rows = _rows(cold_pages)
    tree = kdtree_build(values, rows, block_size, "max-variance", stop="capacity")
    for leaf in tree.leaves:
        leaf.rows = lexicographic(values, leaf.rows)
    return tree


def partition_table(table: Table, workload: Sequence[Query], block_size: int,
                    cfg: PartitionConfig | None = None, seed: int = 0) -> PartitionOutput:
    cfg = cfg or PartitionConfig()
    t = {}
    t0 = time.perf_counter()
    pages = presegment(table.values, cfg.page_size)
    t["presegment"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    encode_pages(pages, workload)
    if cfg.filter == "hard":
        hot_pages, cold_pages = filter_hard(pages, cfg.freq_limit)
        zones = label_zones(pages, cfg.freq_limit)
        subtables = cluster_hot(hot_pages, "hard", cfg, seed)
    elif cfg.filter == "soft":
        hot_zones, cold_pages, zones = filter_soft(pages, cfg.freq_limit, cfg.size_threshold)
        hot_pages = [p for z in hot_zones for p in z.pages]
        subtables = cluster_hot(hot_zones, "soft", cfg, seed)
    else:
        raise ValueError(f"unknown filter mode {cfg.filter!r}")
    t["filter"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cold_tree = reorganize_cold(table.values, cold_pages, block_size)
    t["cold"] = time.perf_counter() - t0

    out = PartitionOutput(subtables, cold_tree, pages, zones, hot_pages, cold_pages, cfg, t)
    assert out.hot_rows + out.cold_rows == table.n
    return out
