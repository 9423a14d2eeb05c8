"""Data-aware block generation baselines and the one-tuple-per-block baseline."""

from __future__ import annotations

import numpy as np

from .core import MBR, Table
from .reorg import lexicographic
from .spatial import CLUSTER, LEAF, Node, Tree, hilbert_keys, kdtree_build

TUPLE_BASELINE_MAX = 100_000


class TableTooLargeError(ValueError):
    pass


def flat_tree(values: np.ndarray, chunks: list[np.ndarray]) -> Tree:
    """One-level index: a root whose children are the given row chunks."""
    if not chunks:
        return Tree(None, "flat")
    leaves = []
    for rows in chunks:
        pts = values[rows]
        leaves.append(Node(LEAF, MBR(pts.min(0), pts.max(0)), rows=rows))
    root = Node(CLUSTER, MBR(values.min(0), values.max(0)), children=leaves)
    return Tree(root, "flat")


def _chunked(order: np.ndarray, block_size: int) -> list[np.ndarray]:
    return [order[i:i + block_size] for i in range(0, order.size, block_size)]


def key_order_blocks(table: Table, block_size: int) -> Tree:
    """Sort tuples lexicographically (schema column order) and cut every block_size."""
    order = lexicographic(table.values, np.arange(table.n))
    return flat_tree(table.values, _chunked(order, block_size))


def kdtree_blocks(table: Table, block_size: int) -> Tree:
    """Round-robin median KD-tree; each leaf (at most block_size rows) is a block."""
    tree = kdtree_build(table.values, None, block_size, "round-robin", stop="capacity")
    for leaf in tree.leaves:
        leaf.rows = lexicographic(table.values, leaf.rows)
    return tree


def curve_blocks(table: Table, block_size: int, order: int | None = None) -> Tree:
    """Order tuples along the Hilbert curve and cut every block_size."""
    keys = hilbert_keys(table.values, order)
    seq = np.lexsort((np.arange(table.n), keys))
    return flat_tree(table.values, _chunked(seq, block_size))


def tuple_baseline(table: Table, max_rows: int = TUPLE_BASELINE_MAX) -> Tree:
    if table.n > max_rows:
        raise TableTooLargeError(
            f"tuple baseline limited to {max_rows} rows (table has {table.n}); raise --tuple-max to override")
    return flat_tree(table.values, [np.array([i]) for i in range(table.n)])
