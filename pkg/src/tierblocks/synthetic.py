"""Synthetic tables for experiments and tests."""

from __future__ import annotations

import numpy as np

from .core import Schema, Table


def _normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(0), values.max(0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return np.where(hi > lo, (values - lo) / span, 0.0)


def uniform_table(n: int, d: int, seed: int = 0) -> Table:
    rng = np.random.default_rng(seed)
    return Table(Schema.numeric(d), rng.random((n, d)))


def clustered_table(n: int, d: int = 5, clusters: int = 20, noise: float = 0.1, seed: int = 0) -> Table:
    """Gaussian blobs of uneven weight and spread over a uniform background,
    Max-Min normalized."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.1, 0.9, (clusters, d))
    spread = rng.uniform(0.02, 0.08, (clusters, d))
    weights = rng.dirichlet(np.full(clusters, 0.8))
    n_bg = int(round(noise * n))
    labels = rng.choice(clusters, size=n - n_bg, p=weights)
    pts = centers[labels] + rng.standard_normal((n - n_bg, d)) * spread[labels]
    pts = np.vstack([pts, rng.random((n_bg, d))])
    pts = np.clip(pts, 0.0, 1.0)
    pts = pts[rng.permutation(n)]
    return Table(Schema.numeric(d), _normalize(pts))
