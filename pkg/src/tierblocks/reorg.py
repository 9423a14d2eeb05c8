"""Workload-aware tuple reorganization.

Tuples are encoded by which representative queries they satisfy, then split
top-down by balanced k-means until every cluster fits in one block. Nodes whose
encodings are too uniform to cluster fall back to a KD-tree split.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import MBR, Block, Query, Tier, intersects_many, satisfying_mask
from .spatial import CLUSTER, LEAF, SPLIT, Node, Tree, hilbert_keys, kdtree_build


@dataclass
class ReorgConfig:
    phi: float = 1.0
    max_iter: int = 25
    fanout_target: int = 8
    k_max: int = 16
    skew_tau: float = 0.9
    # rows no representative query touches carry no workload signal; split them spatially
    isolate_unmatched: bool = True


@dataclass
class BalancedKMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective: float
    history: list[float] = field(default_factory=list)
    n_iter: int = 0

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def encode_tuples(values: np.ndarray, workload: Sequence[Query]) -> np.ndarray:
    """Feature matrix: ``X[i, j] = 1`` iff tuple ``i`` satisfies query ``j``."""
    if len(workload) == 0:
        raise ValueError("workload must be non-empty")
    X = np.zeros((values.shape[0], len(workload)), dtype=np.uint8)
    for j, q in enumerate(workload):
        X[:, j] = satisfying_mask(q, values)
    return X


def _sqdist(P: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (P * P).sum(1)[:, None] - 2.0 * P @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def waterfill(costs: np.ndarray, step: float, m: int) -> np.ndarray:
    """Allocate ``m`` units across bins whose t-th unit costs ``costs[j] + step*t``.

    Equivalent to handing out units one at a time to the cheapest bin (lowest
    index on ties), but in O(k log m).
    """
    k = costs.shape[0]
    out = np.zeros(k, dtype=np.int64)
    if m <= 0:
        return out
    if step <= 0:
        out[int(np.argmin(costs))] = m
        return out
    b = costs / step
    eps = 1e-9 * max(1.0, float(np.abs(b).max()), float(m))

    def count_le(level: float) -> int:
        return int(np.maximum(0, np.floor(level - b + eps) + 1).sum())

    lo, hi = float(b.min()) - 1.0, float(b.min()) + m
    for _ in range(200):
        if hi - lo <= eps:
            break
        mid = (lo + hi) / 2.0
        if count_le(mid) >= m:
            hi = mid
        else:
            lo = mid
    # snap to the exact m-th cheapest unit cost
    t = np.maximum(0, np.ceil(hi - eps - b))
    level = float((b + t).min())
    strict = np.maximum(0, np.ceil(level - b - eps)).astype(np.int64)
    out[:] = strict
    rest = m - int(strict.sum())
    if rest > 0:
        tied = np.flatnonzero(np.abs(b + strict - level) <= eps)
        out[tied[:rest]] += 1
    return out


def _balanced_assign(D: np.ndarray, counts: np.ndarray, n: int, phi: float) -> np.ndarray:
    """Greedy marginal-cost assignment of pattern groups to clusters.

    Each unit pays its squared distance plus the increase of
    ``phi * (size - n/k)**2``. Groups with the strongest preference go first.
    """
    u, k = D.shape
    A = np.zeros((u, k), dtype=np.int64)
    if k == 1:
        A[:, 0] = counts
        return A
    part = np.partition(D, 1, axis=1)
    gap = part[:, 1] - part[:, 0]
    order = np.lexsort((np.arange(u), -gap))
    if phi == 0:
        A[np.arange(u), np.argmin(D, axis=1)] = counts
        return A
    sizes = [0] * k
    offset = phi * (1.0 - 2.0 * n / k)
    rows = D.tolist()
    cnt = counts.tolist()
    ks = range(k)
    for g in order.tolist():
        m = cnt[g]
        dist = rows[g]
        if m <= 32:
            for _ in range(m):
                best, best_cost = 0, dist[0] + 2.0 * phi * sizes[0]
                for j in ks:
                    c = dist[j] + 2.0 * phi * sizes[j]
                    if c < best_cost:
                        best, best_cost = j, c
                sizes[best] += 1
                A[g, best] += 1
        else:
            costs = np.array(dist) + phi * 2.0 * np.array(sizes, dtype=np.float64) + offset
            alloc = waterfill(costs, 2.0 * phi, m)
            A[g] = alloc
            for j in ks:
                sizes[j] += int(alloc[j])
    return A


def _objective(P: np.ndarray, A: np.ndarray, C: np.ndarray, n: int, phi: float) -> float:
    D = _sqdist(P, C)
    sizes = A.sum(0)
    return float((A * D).sum() + phi * ((sizes - n / C.shape[0]) ** 2).sum())


def _centroids(P: np.ndarray, A: np.ndarray, prev: np.ndarray) -> np.ndarray:
    sizes = A.sum(0)
    C = prev.copy()
    full = sizes > 0
    C[full] = (A[:, full].T @ P) / sizes[full][:, None]
    return C


def _seed_centroids(P: np.ndarray, counts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    w = counts / counts.sum()
    chosen = [int(rng.choice(len(P), p=w))]
    best = _sqdist(P, P[chosen])[:, 0]
    for _ in range(1, k):
        weights = counts * best
        if weights.sum() <= 0:
            weights = counts.astype(np.float64)
        nxt = int(rng.choice(len(P), p=weights / weights.sum()))
        chosen.append(nxt)
        best = np.minimum(best, _sqdist(P, P[[nxt]])[:, 0])
    return P[chosen].astype(np.float64)


def balanced_kmeans(X: np.ndarray, k: int, phi: float = 1.0, max_iter: int = 25, seed: int = 0,
                    row_order: np.ndarray | None = None) -> BalancedKMeansResult:
    """Balanced k-means minimizing ``||X - HC||_F^2 + phi * (k/n) * sum_i (|cluster_i| - n/k)^2``.

    The penalty is scaled by the target size ``n/k`` so one unit of imbalance
    per target-sized cluster costs about one flipped feature bit at any n.
    Identical rows are handled as weighted patterns. When a pattern is split
    over several clusters its rows are dealt out in ``row_order`` (a rank per
    row, default row index) so each cluster receives a contiguous run.
    """
    X = np.asarray(X)
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds row count {n}")
    if phi < 0:
        raise ValueError("phi must be non-negative")
    rng = np.random.default_rng(seed)
    P, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    P = P.astype(np.float64)
    lam = phi * k / n

    C = _seed_centroids(P, counts, k, rng)
    A_prev = None
    obj_prev = math.inf
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        D = _sqdist(P, C)
        A = _balanced_assign(D, counts, n, lam)
        C_new = _centroids(P, A, C)
        sizes = A.sum(0)
        if np.any(sizes == 0):
            # reseed empty clusters from the patterns farthest from their centroid
            far = np.argsort(-(_sqdist(P, C_new) * (A > 0)).max(1), kind="stable")
            for slot, j in enumerate(np.flatnonzero(sizes == 0)):
                C_new[j] = P[far[slot % len(far)]]
        obj = _objective(P, A, C_new, n, lam)
        if A_prev is not None and obj > obj_prev:
            n_iter -= 1
            break
        converged = A_prev is not None and np.array_equal(A, A_prev)
        A_prev, C, obj_prev = A, C_new, obj
        history.append(obj)
        if converged:
            break

    labels = _expand_labels(A_prev, inverse, row_order)
    return BalancedKMeansResult(labels, C, obj_prev, history, n_iter)


def _expand_labels(A: np.ndarray, inverse: np.ndarray, row_order: np.ndarray | None) -> np.ndarray:
    n = inverse.shape[0]
    labels = np.empty(n, dtype=np.int64)
    rank = np.arange(n) if row_order is None else np.asarray(row_order)
    order = np.lexsort((np.arange(n), rank, inverse))
    grouped = inverse[order]
    bounds = np.flatnonzero(np.diff(grouped)) + 1
    for g_rows in np.split(order, bounds):
        g = inverse[g_rows[0]]
        labels[g_rows] = np.repeat(np.arange(A.shape[1]), A[g])
    return labels


def dynamic_adjust_k(node_size: int, block_size: int, fanout_target: int = 8, k_max: int = 16) -> int:
    k = math.ceil(node_size / (fanout_target * block_size))
    return int(min(max(k, 2), k_max))


def detect_skew(X: np.ndarray, k: int, tau: float = 0.9) -> bool:
    n = X.shape[0]
    if n == 0:
        return True
    _, counts = np.unique(X, axis=0, return_counts=True)
    return bool(len(counts) < k or counts.max() > tau * n)


def lexicographic(values: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """``rows`` reordered by their tuple values, first column most significant."""
    if rows.size <= 1:
        return rows
    pts = values[rows]
    keys = [rows] + [pts[:, c] for c in range(pts.shape[1] - 1, -1, -1)]
    return rows[np.lexsort(keys)]


def _leaf(values: np.ndarray, rows: np.ndarray) -> Node:
    rows = lexicographic(values, rows)
    pts = values[rows]
    return Node(LEAF, MBR(pts.min(0), pts.max(0)), rows=rows)


def _kd_fallback(values: np.ndarray, rows: np.ndarray, block_size: int) -> Node:
    sub = kdtree_build(values, rows, block_size, "max-variance", stop="capacity").root
    for node in Tree(sub).leaves:
        node.rows = lexicographic(values, node.rows)
    return sub


def hbc(values: np.ndarray, rows: np.ndarray, workload: Sequence[Query] | None, block_size: int,
        cfg: ReorgConfig | None = None, seed: int = 0, tree_id: int = 0,
        features: np.ndarray | None = None) -> Tree:
    """Hierarchical balanced clustering of ``values[rows]`` into a routing tree.

    Pops nodes from a FIFO queue; each node is split either by balanced
    k-means on its encodings or, when skewed, by a KD-tree into blocks.
    Children that fit in a block become leaves, larger ones are re-queued.
    """
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    cfg = cfg or ReorgConfig()
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return Tree(None, "hbc", tree_id)
    if features is None:
        features = encode_tuples(values[rows], workload)
    if rows.size <= block_size:
        return Tree(_leaf(values, rows), "hbc", tree_id)

    local_rank = np.empty(rows.size, dtype=np.int64)
    local_rank[np.argsort(hilbert_keys(values[rows]), kind="stable")] = np.arange(rows.size)

    root = Node(CLUSTER, MBR(values[rows].min(0), values[rows].max(0)))
    start = np.arange(rows.size)
    if cfg.isolate_unmatched:
        unmatched = ~features.any(axis=1)
        if unmatched.any() and not unmatched.all():
            root.children.append(_kd_fallback(values, rows[unmatched], block_size))
            start = np.flatnonzero(~unmatched)
    queue: deque[tuple[Node, np.ndarray]] = deque()
    if start.size <= block_size and root.children:
        root.children.append(_leaf(values, rows[start]))
    elif root.children:
        pts = values[rows[start]]
        child = Node(CLUSTER, MBR(pts.min(0), pts.max(0)))
        root.children.append(child)
        queue.append((child, start))
    else:
        queue.append((root, start))
    counter = 0
    while queue:
        node, idx = queue.popleft()
        counter += 1
        k = min(dynamic_adjust_k(idx.size, block_size, cfg.fanout_target, cfg.k_max), idx.size)
        X = features[idx]
        groups = None
        if not detect_skew(X, k, cfg.skew_tau):
            res = balanced_kmeans(X, k, cfg.phi, cfg.max_iter, seed + counter, local_rank[idx])
            groups = [idx[res.labels == j] for j in range(res.k)]
            groups = [g for g in groups if g.size]
            if len(groups) < 2:
                groups = None
        if groups is None:
            sub = _kd_fallback(values, rows[idx], block_size)
            node.kind = sub.kind
            node.children = sub.children
            node.rows = sub.rows
            node.split_dim, node.split_value = sub.split_dim, sub.split_value
            continue
        node.kind = CLUSTER
        for g in groups:
            if g.size <= block_size:
                node.children.append(_leaf(values, rows[g]))
            else:
                pts = values[rows[g]]
                child = Node(CLUSTER, MBR(pts.min(0), pts.max(0)))
                node.children.append(child)
                queue.append((child, g))
    return Tree(root, "hbc", tree_id)


def block_heats(blocks: Sequence[Block], workload: Sequence[Query]) -> np.ndarray:
    """Number of queries whose box meets each block's MBR."""
    if not blocks:
        return np.zeros(0)
    mins = np.stack([b.mbr.mins for b in blocks])
    maxs = np.stack([b.mbr.maxs for b in blocks])
    heat = np.zeros(len(blocks))
    for q in workload:
        heat += intersects_many(q, mins, maxs)
    return heat


def initial_placement(blocks: Sequence[Block], workload: Sequence[Query], budget: int,
                      solver: str = "dp") -> list[Block]:
    """Seed block heats from the representative workload and fill the edge by knapsack."""
    from .scheduler import KnapsackInstance, solve_knapsack

    heats = block_heats(blocks, workload)
    inst = KnapsackInstance(int(budget), [b.size for b in blocks], heats.tolist(),
                            ids=[b.block_id for b in blocks])
    plan = solve_knapsack(inst, solver)
    for b, h in zip(blocks, heats):
        b.heat = float(h)
        b.placement = Tier.EDGE if b.block_id in plan.selected else Tier.CLOUD
    return list(blocks)
