"""KD-tree construction and routing, Hilbert keys, and the tree node type that
both KD-trees and hierarchical clustering trees are made of."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .core import MBR, Query, Tier, intersects_many, query_intersects

MAX_KEY_BITS = 63
DEFAULT_HILBERT_ORDER = 8

# Node kinds. "split" is a KD-tree internal node, "cluster" an HBC internal node.
SPLIT = "split"
CLUSTER = "cluster"
LEAF = "leaf"


@dataclass(eq=False)
class Node:
    kind: str
    mbr: MBR
    children: list["Node"] = field(default_factory=list)
    rows: np.ndarray | None = None
    split_dim: int | None = None
    split_value: float | None = None
    block_id: int | None = None
    placement: Tier | None = None

    @property
    def is_leaf(self) -> bool:
        return self.kind == LEAF

    @property
    def size(self) -> int:
        if self.is_leaf:
            return int(self.rows.shape[0])
        return sum(c.size for c in self.children)


class Tree:
    """A rooted tree of :class:`Node`; ``kind`` is ``"kd"``, ``"hbc"`` or ``"flat"``.

    Leaves are enumerated once and their MBRs stacked so that flat scans are
    a single vectorized test.
    """

    def __init__(self, root: Node | None, kind: str = "kd", tree_id: int = 0):
        self.root = root
        self.kind = kind
        self.tree_id = tree_id
        self.refresh()

    def refresh(self) -> None:
        self.leaves: list[Node] = list(self._iter_leaves()) if self.root is not None else []
        if self.leaves:
            self.leaf_mins = np.stack([l.mbr.mins for l in self.leaves])
            self.leaf_maxs = np.stack([l.mbr.maxs for l in self.leaves])
        else:
            self.leaf_mins = self.leaf_maxs = np.empty((0, 0))

    def _iter_leaves(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.extend(reversed(node.children))

    def nodes(self) -> Iterator[Node]:
        if self.root is None:
            return
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def __len__(self) -> int:
        return self.n_leaves


MANIFEST_VERSION = 1


def node_to_record(node: Node) -> dict:
    """Nested JSON-ready record for ``node`` and its subtree."""
    rec: dict = {"kind": node.kind, "mbr": {"mins": node.mbr.mins.tolist(), "maxs": node.mbr.maxs.tolist()}}
    if node.is_leaf:
        rec["rows"] = node.rows.tolist()
        rec["block_id"] = node.block_id
        rec["placement"] = None if node.placement is None else Tier(node.placement).value
    else:
        if node.split_dim is not None:
            rec["split_dim"] = node.split_dim
            rec["split_value"] = node.split_value
        rec["children"] = [node_to_record(c) for c in node.children]
    return rec


def node_from_record(rec: dict) -> Node:
    mbr = MBR(np.array(rec["mbr"]["mins"], dtype=np.float64), np.array(rec["mbr"]["maxs"], dtype=np.float64))
    if rec["kind"] == LEAF:
        placement = rec.get("placement")
        return Node(LEAF, mbr, rows=np.array(rec["rows"], dtype=np.int64), block_id=rec.get("block_id"),
                    placement=None if placement is None else Tier(placement))
    if rec["kind"] not in (SPLIT, CLUSTER):
        raise ValueError(f"unknown node kind {rec['kind']!r}")
    return Node(rec["kind"], mbr, children=[node_from_record(c) for c in rec["children"]],
                split_dim=rec.get("split_dim"), split_value=rec.get("split_value"))


def tree_to_manifest(tree: Tree) -> dict:
    return {"version": MANIFEST_VERSION, "kind": tree.kind, "tree_id": tree.tree_id,
            "root": None if tree.root is None else node_to_record(tree.root)}


def tree_from_manifest(doc: dict) -> Tree:
    if doc.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {doc.get('version')!r}")
    root = None if doc["root"] is None else node_from_record(doc["root"])
    return Tree(root, doc["kind"], doc.get("tree_id", 0))


def _node_mbr(values: np.ndarray, rows: np.ndarray) -> MBR:
    pts = values[rows]
    return MBR(pts.min(axis=0), pts.max(axis=0))


def kdtree_build(values: np.ndarray, rows: np.ndarray | None, capacity: int,
                 rule: str = "max-variance", stop: str = "presegment") -> Tree:
    """Median-split KD-tree over ``values[rows]``.

    ``rule`` picks the split dimension: ``"max-variance"`` (highest variance)
    or ``"round-robin"`` (depth mod d). ``stop="presegment"`` makes a leaf once
    a node holds fewer than ``2 * capacity`` tuples; ``stop="capacity"`` once
    it holds at most ``capacity``. Median ties are broken by row id.
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    if rule not in ("max-variance", "round-robin"):
        raise ValueError(f"unknown split rule {rule!r}")
    if stop not in ("presegment", "capacity"):
        raise ValueError(f"unknown stop rule {stop!r}")
    values = np.asarray(values, dtype=np.float64)
    rows = np.arange(values.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return Tree(None, "kd")
    d = values.shape[1]

    def is_leaf(n: int) -> bool:
        return n < 2 * capacity if stop == "presegment" else n <= capacity

    def build(rs: np.ndarray, depth: int) -> Node:
        mbr = _node_mbr(values, rs)
        if is_leaf(rs.size):
            return Node(LEAF, mbr, rows=np.sort(rs))
        if rule == "round-robin":
            dim = depth % d
        else:
            dim = int(np.argmax(values[rs].var(axis=0)))
        order = np.lexsort((rs, values[rs, dim]))
        ordered = rs[order]
        mid = (rs.size + 1) // 2
        left, right = ordered[:mid], ordered[mid:]
        node = Node(SPLIT, mbr, split_dim=dim, split_value=float(values[left[-1], dim]))
        node.children = [build(left, depth + 1), build(right, depth + 1)]
        return node

    return Tree(build(rows, 0), "kd")


def route_descend(tree: Tree, q: Query) -> list[Node]:
    """Leaves reached by descending from the root, pruning on node MBRs."""
    if tree.root is None:
        return []
    out = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if not query_intersects(q, node.mbr):
            continue
        if node.is_leaf:
            out.append(node)
        else:
            stack.extend(reversed(node.children))
    return out


def route_scan(tree: Tree, q: Query) -> list[Node]:
    """Leaves found by testing every leaf MBR directly."""
    if not tree.leaves:
        return []
    hit = intersects_many(q, tree.leaf_mins, tree.leaf_maxs)
    return [tree.leaves[i] for i in np.flatnonzero(hit)]


def kdtree_route(tree: Tree, q: Query) -> list[Node]:
    return route_descend(tree, q)


def hilbert_order_for(d: int, order: int | None = None) -> int:
    """Default per-dimension resolution that keeps keys within 63 bits."""
    if order is None:
        order = min(DEFAULT_HILBERT_ORDER, MAX_KEY_BITS // d)
    return max(1, order)


def _check_width(d: int, order: int) -> None:
    if d < 1 or order < 1:
        raise ValueError("d and order must be positive")
    if d * order > MAX_KEY_BITS:
        raise ValueError(f"d*order = {d * order} exceeds the {MAX_KEY_BITS}-bit key width")


def hilbert_keys_from_cells(cells: np.ndarray, order: int) -> np.ndarray:
    """Hilbert index of integer grid cells (shape ``(m, d)``), vectorized.

    Skilling's transpose algorithm followed by bit interleaving.
    """
    x = np.array(cells, dtype=np.int64, copy=True)
    if x.ndim == 1:
        x = x[None, :]
    m, d = x.shape
    _check_width(d, order)
    if np.any(x < 0) or np.any(x >= (1 << order)):
        raise ValueError("cell coordinate outside the grid")
    cols = [x[:, i].copy() for i in range(d)]
    # inverse undo excess work
    q = 1 << (order - 1)
    while q > 1:
        p = q - 1
        for i in range(d):
            has = (cols[i] & q) != 0
            flip = np.where(has, p, 0)
            t = np.where(has, 0, (cols[0] ^ cols[i]) & p)
            cols[0] = cols[0] ^ flip ^ t
            if i != 0:
                cols[i] = cols[i] ^ t
        q >>= 1
    # gray encode
    for i in range(1, d):
        cols[i] = cols[i] ^ cols[i - 1]
    t = np.zeros(m, dtype=np.int64)
    q = 1 << (order - 1)
    while q > 1:
        t = np.where((cols[d - 1] & q) != 0, t ^ (q - 1), t)
        q >>= 1
    cols = [c ^ t for c in cols]
    key = np.zeros(m, dtype=np.int64)
    for bit in range(order - 1, -1, -1):
        for i in range(d):
            key = (key << 1) | ((cols[i] >> bit) & 1)
    return key


def cells_of(points: np.ndarray, order: int) -> np.ndarray:
    side = 1 << order
    pts = np.clip(np.asarray(points, dtype=np.float64), 0.0, 1.0)
    return np.minimum((pts * side).astype(np.int64), side - 1)


def hilbert_keys(points: np.ndarray, order: int | None = None) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[None, :]
    order = hilbert_order_for(pts.shape[1], order)
    return hilbert_keys_from_cells(cells_of(pts, order), order)


def hilbert_index(point: Sequence[float], order: int) -> int:
    pt = np.asarray(point, dtype=np.float64)
    _check_width(pt.shape[0], order)
    return int(hilbert_keys_from_cells(cells_of(pt[None, :], order), order)[0])
