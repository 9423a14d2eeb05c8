"""Query routing over the cold KD-tree plus the forest of hot clustering trees,
and the block directory that tracks heat and tier placement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Block, Query, Table, Tier, intersects_many, matching_rows
from .spatial import Node, Tree, route_descend, route_scan

DEFAULT_LEAF_SCAN_THRESHOLD = 64


class UnknownBlockError(KeyError):
    pass


@dataclass(frozen=True)
class Answer:
    """Routed blocks for one query and the number of satisfying tuples in each."""

    blocks: np.ndarray
    matches: np.ndarray

    @property
    def total(self) -> int:
        return int(self.matches.sum())


class RoutingForest:
    """Cold index, hot trees and the block directory built from their leaves.

    Block ids are assigned in tree order (cold index first) and leaf order.
    ``heat``, ``hits`` and ``on_edge`` are the authoritative per-block state;
    :meth:`sync_blocks` mirrors them onto the :class:`Block` records and leaves.
    """

    def __init__(self, table: Table, cold: Tree | None, hot: Sequence[Tree] = (),
                 leaf_scan_threshold: int = DEFAULT_LEAF_SCAN_THRESHOLD):
        self.table = table
        self.values = values = table.values
        self.cold = cold
        self.hot = list(hot)
        self.leaf_scan_threshold = leaf_scan_threshold
        self.blocks: list[Block] = []
        self.leaf_of: list[Node] = []
        for tree in self.trees:
            for leaf in tree.leaves:
                leaf.block_id = len(self.blocks)
                leaf.placement = Tier.CLOUD
                self.blocks.append(Block(leaf.block_id, leaf.rows, leaf.mbr))
                self.leaf_of.append(leaf)
        self.sizes = np.array([b.size for b in self.blocks], dtype=np.int64)
        self.block_of_row = np.full(values.shape[0], -1, dtype=np.int64)
        for b in self.blocks:
            self.block_of_row[b.rows] = b.block_id
        self._answers: dict[Query, Answer] = {}
        # small trees are scanned flat; stack their leaves once for a single vectorized test
        small = [t for t in self.trees if 0 < t.n_leaves <= leaf_scan_threshold]
        self._scan_ids = np.array([l.block_id for t in small for l in t.leaves], dtype=np.int64)
        self._scan_mins = np.vstack([t.leaf_mins for t in small]) if small else np.empty((0, values.shape[1]))
        self._scan_maxs = np.vstack([t.leaf_maxs for t in small]) if small else np.empty((0, values.shape[1]))
        self._large = [t for t in self.trees if t.n_leaves > leaf_scan_threshold]
        self.reset_state()

    @property
    def trees(self) -> list[Tree]:
        return ([self.cold] if self.cold is not None else []) + self.hot

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def reset_state(self) -> None:
        self.heat = np.zeros(self.n_blocks)
        self.hits = np.zeros(self.n_blocks, dtype=np.int64)
        self.on_edge = np.zeros(self.n_blocks, dtype=bool)
        self.sync_blocks()

    def sync_blocks(self) -> None:
        for b, leaf, h, c, e in zip(self.blocks, self.leaf_of, self.heat, self.hits, self.on_edge):
            b.heat = float(h)
            b.hits = int(c)
            b.placement = leaf.placement = Tier.EDGE if e else Tier.CLOUD

    def edge_ids(self) -> np.ndarray:
        return np.flatnonzero(self.on_edge)

    def answer(self, q: Query) -> Answer:
        """Routed blocks for ``q`` plus per-block satisfying counts; memoized."""
        ans = self._answers.get(q)
        if ans is None:
            blocks = route_query(self, q)
            rows = matching_rows(self.table, q)
            per_block = np.bincount(self.block_of_row[rows], minlength=self.n_blocks)
            ans = Answer(blocks, per_block[blocks])
            self._answers[q] = ans
        return ans

    def check(self) -> None:
        """Assert directory/tree agreement and that blocks partition the rows."""
        ids = [leaf.block_id for t in self.trees for leaf in t.leaves]
        assert ids == list(range(self.n_blocks)), "block ids out of sync with leaves"
        assert np.all(self.block_of_row >= 0), "row missing from every block"
        assert int(self.sizes.sum()) == self.values.shape[0], "blocks overlap"
        for b, leaf in zip(self.blocks, self.leaf_of):
            assert leaf.placement == b.placement


def route_query(forest: RoutingForest, q: Query, leaf_scan_threshold: int | None = None) -> np.ndarray:
    """Sorted ids of every block whose MBR meets ``q``, across all trees.

    Trees with at most ``leaf_scan_threshold`` leaves are scanned flat;
    larger ones are descended from the root with MBR pruning.
    """
    if leaf_scan_threshold is None or leaf_scan_threshold == forest.leaf_scan_threshold:
        hit = forest._scan_ids[intersects_many(q, forest._scan_mins, forest._scan_maxs)]
        out = hit.tolist()
        for tree in forest._large:
            out.extend(leaf.block_id for leaf in route_descend(tree, q))
        return np.array(sorted(out), dtype=np.int64)
    threshold = leaf_scan_threshold
    out: list[int] = []
    for tree in forest.trees:
        if tree.n_leaves <= threshold:
            leaves = route_scan(tree, q)
        else:
            leaves = route_descend(tree, q)
        out.extend(leaf.block_id for leaf in leaves)
    return np.array(sorted(out), dtype=np.int64)


def apply_placement(forest: RoutingForest, selected: Iterable[int]) -> int:
    """Make exactly ``selected`` edge-resident; returns how many tags changed."""
    new = np.zeros(forest.n_blocks, dtype=bool)
    for i in selected:
        if not 0 <= i < forest.n_blocks:
            raise UnknownBlockError(i)
        new[i] = True
    changed = np.flatnonzero(new != forest.on_edge)
    forest.on_edge = new
    for i in changed:
        tier = Tier.EDGE if new[i] else Tier.CLOUD
        forest.blocks[i].placement = tier
        forest.leaf_of[i].placement = tier
    return int(changed.size)
