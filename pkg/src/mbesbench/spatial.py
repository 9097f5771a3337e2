"""Exact nearest-neighbor and radius queries over 3D points.

Backed by scipy's cKDTree for pruning; the reported distances are always
recomputed with plain numpy arithmetic and ties are broken by ascending
point index, so single-point queries match a brute-force scan exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloud

# Relative padding applied to candidate radii before exact re-evaluation;
# covers any ulp-level disagreement between tree and numpy distances.
_PAD = 1e-9


@dataclass(frozen=True)
class SpatialIndex:
    """Immutable snapshot of a cloud's points plus a kd-tree over them."""

    points: np.ndarray
    tree: cKDTree

    def __len__(self) -> int:
        return self.points.shape[0]

    # Batch helpers for the registration/preprocess inner loops. These are
    # exact cKDTree queries (deterministic for a fixed build) but skip the
    # index-order tie-break pass of knn()/radius_search().

    def knn_batch(self, queries: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(dists, indices), each (m, k). k is capped at the index size."""
        k = min(k, len(self))
        d, i = self.tree.query(np.asarray(queries, dtype=np.float64), k=k)
        return d.reshape(-1, k), i.reshape(-1, k)

    def nearest_within(self, queries: np.ndarray, max_dist: float) -> tuple[np.ndarray, np.ndarray]:
        """Nearest index per query, or -1 when nothing lies within max_dist."""
        d, i = self.tree.query(np.asarray(queries, dtype=np.float64), k=1,
                               distance_upper_bound=max_dist)
        i = np.where(np.isfinite(d), i, -1)
        return d, i

    def ball_batch(self, queries: np.ndarray, r: float) -> list[np.ndarray]:
        """Indices within r of each query (unsorted), one array per query."""
        hits = self.tree.query_ball_point(np.asarray(queries, dtype=np.float64), r)
        return [np.asarray(h, dtype=np.int64) for h in hits]


def build_index(cloud: PointCloud) -> SpatialIndex:
    if len(cloud) == 0:
        raise ValueError("empty input")
    return SpatialIndex(cloud.points, cKDTree(cloud.points))


def _exact_sorted(points: np.ndarray, candidates: np.ndarray, query: np.ndarray):
    """Numpy distances for candidate indices, sorted by (distance, index)."""
    d = np.linalg.norm(points[candidates] - query, axis=1)
    order = np.lexsort((candidates, d))
    return candidates[order], d[order]


def knn(index: SpatialIndex, query, k: int) -> list[tuple[int, float]]:
    """The k nearest points by Euclidean distance, ascending.

    Returns (point_index, distance) pairs; fewer than k when the index is
    smaller. Equal distances are ordered by ascending point index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64).reshape(3)
    n = len(index)
    if k >= n:
        cand = np.arange(n, dtype=np.int64)
    else:
        d, _ = index.tree.query(q, k=k)
        dk = float(np.max(d))
        cand = np.asarray(index.tree.query_ball_point(q, dk * (1 + _PAD) + 1e-12),
                          dtype=np.int64)
    idx, dist = _exact_sorted(index.points, cand, q)
    return list(zip(idx[:k].tolist(), dist[:k].tolist()))


def radius_search(index: SpatialIndex, query, r: float) -> list[tuple[int, float]]:
    """Exactly the points with distance <= r, sorted ascending (ties by index)."""
    if r <= 0:
        raise ValueError("radius must be > 0")
    q = np.asarray(query, dtype=np.float64).reshape(3)
    cand = np.asarray(index.tree.query_ball_point(q, r * (1 + _PAD) + 1e-12),
                      dtype=np.int64)
    idx, dist = _exact_sorted(index.points, cand, q)
    keep = dist <= r
    return list(zip(idx[keep].tolist(), dist[keep].tolist()))
