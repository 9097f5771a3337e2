"""Voxel-grid downsampling, point-cap subsampling, and surface normals."""

from __future__ import annotations

import numpy as np

from .core import PointCloud
from .spatial import build_index


def voxel_keys(points: np.ndarray, voxel: float, origin: np.ndarray) -> np.ndarray:
    """Integer voxel coordinates floor((p - origin) / voxel), (n, 3)."""
    return np.floor((points - origin) / voxel).astype(np.int64)


def voxel_downsample(cloud: PointCloud, voxel: float = 1.0) -> PointCloud:
    """One point per occupied voxel: the centroid of the voxel's points.

    The grid origin is the cloud's minimum corner; output is sorted by voxel
    key lexicographically, so the result is deterministic. Normals, if any,
    are dropped (downsampling precedes normal estimation in the pipeline).
    """
    if voxel <= 0:
        raise ValueError("voxel size must be > 0")
    if len(cloud) == 0:
        raise ValueError("empty cloud")
    pts = cloud.points
    keys = voxel_keys(pts, voxel, pts.min(axis=0))
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    counts = np.bincount(inv, minlength=len(uniq)).astype(np.float64)
    sums = np.column_stack([np.bincount(inv, weights=pts[:, c], minlength=len(uniq))
                            for c in range(3)])
    return PointCloud(sums / counts[:, None])


def random_cap(cloud: PointCloud, max_points: int = 10000, seed: int = 0) -> PointCloud:
    """Uniform random subset of exactly max_points when the cloud is larger."""
    if max_points < 1:
        raise ValueError("max_points must be >= 1")
    n = len(cloud)
    if n <= max_points:
        return cloud
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(n, size=max_points, replace=False))
    nrm = None if cloud.normals is None else cloud.normals[keep]
    return PointCloud(cloud.points[keep], nrm)


def estimate_normals(cloud: PointCloud, radius: float = 5.0) -> PointCloud:
    """Per-point normals from the smallest principal direction of the
    radius neighborhood; neighborhoods with fewer than 5 points fall back
    to the 10 nearest neighbors. Normals are oriented upward (n_z >= 0),
    which matches a sensor flying above the seafloor.
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    n = len(cloud)
    if n < 3:
        raise ValueError("insufficient points")

    # Center globally before accumulating second moments: survey coordinates
    # can be large enough to lose the sub-meter structure in the squares.
    center = cloud.points.mean(axis=0)
    pts = cloud.points - center
    index = build_index(PointCloud(pts))
    hoods = index.ball_batch(pts, radius)

    small = [i for i, h in enumerate(hoods) if h.size < 5]
    if small:
        k = min(10, n)
        _, knn_idx = index.knn_batch(pts[small], k)
        for row, i in enumerate(small):
            hoods[i] = knn_idx[row]

    counts = np.array([h.size for h in hoods], dtype=np.float64)
    owner = np.repeat(np.arange(n), [h.size for h in hoods])
    member = np.concatenate(hoods)
    q = pts[member]

    def acc(values):
        return np.bincount(owner, weights=values, minlength=n)

    mean = np.column_stack([acc(q[:, c]) for c in range(3)]) / counts[:, None]
    cov = np.empty((n, 3, 3))
    for a in range(3):
        for b in range(a, 3):
            m2 = acc(q[:, a] * q[:, b]) / counts
            cov[:, a, b] = cov[:, b, a] = m2 - mean[:, a] * mean[:, b]

    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    flip = normals[:, 2] < 0
    normals[flip] = -normals[flip]
    return PointCloud(cloud.points, normals)
