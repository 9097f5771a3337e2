"""Fast Point Feature Histograms for feature-based registration.

33-dim descriptors: three 11-bin histograms over the Darboux-frame angles
(alpha, phi, theta) between a point and each radius neighbor, each block
percent-normalized to sum 100. Neighbors at zero distance, or whose offset
is parallel to the source normal (degenerate frame), are skipped.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .core import PointCloud
from .spatial import SpatialIndex, build_index, radius_search

BINS = 11
DIM = 3 * BINS

FEAT_MAGIC = b"FEAT"
FEAT_VERSION = 1
_FEAT_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class FeatureSet:
    """Descriptor matrix (n, d) plus the cloud indices each row describes."""

    descriptors: np.ndarray
    point_indices: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.descriptors, dtype=np.float64)
        idx = np.ascontiguousarray(self.point_indices, dtype=np.int64).reshape(-1)
        if d.ndim != 2 or d.shape[0] != idx.shape[0]:
            raise ValueError("descriptor/index shape mismatch")
        if np.isnan(d).any():
            raise ValueError("NaN descriptor entries")
        d.setflags(write=False)
        idx.setflags(write=False)
        object.__setattr__(self, "descriptors", d)
        object.__setattr__(self, "point_indices", idx)

    def __len__(self) -> int:
        return self.descriptors.shape[0]


def validate_fpfh_blocks(fs: FeatureSet, tol: float = 1e-6) -> None:
    """Each 11-bin block sums to 100 (or is all-zero, for isolated points)."""
    for b in range(3):
        s = fs.descriptors[:, b * BINS:(b + 1) * BINS].sum(axis=1)
        bad = (np.abs(s - 100.0) >= tol) & (s != 0.0)
        if bad.any():
            raise ValueError(f"block {b} sums off: {s[bad][:5]}")


def _pair_angles(p_i, n_i, p_j, n_j):
    """Darboux angles per (i, j) pair; zero-offset pairs get valid=False.

    u = n_i, v = (p_j - p_i) x u normalized, w = u x v;
    alpha = v . n_j, phi = u . (p_j - p_i)/dist, theta = atan2(w . n_j, u . n_j).
    When the offset is parallel to u the frame is completed with a fixed
    perpendicular axis instead (degenerate cross product).
    """
    diff = p_j - p_i
    dist = np.linalg.norm(diff, axis=1)
    valid = dist > 0
    safe = np.where(valid, dist, 1.0)
    u = np.broadcast_to(n_i, p_j.shape)
    v = np.cross(diff, u)
    vnorm = np.linalg.norm(v, axis=1)
    degenerate = valid & (vnorm <= 1e-12 * safe)
    if degenerate.any():
        axis = np.zeros((int(degenerate.sum()), 3))
        axis[np.arange(len(axis)), np.argmin(np.abs(u[degenerate]), axis=1)] = 1.0
        v[degenerate] = np.cross(diff[degenerate], axis)
        vnorm = np.linalg.norm(v, axis=1)
    v = v / np.where(vnorm > 0, vnorm, 1.0)[:, None]
    w = np.cross(u, v)
    alpha = np.einsum("ij,ij->i", v, n_j)
    phi = np.einsum("ij,ij->i", u, diff) / safe
    theta = np.arctan2(np.einsum("ij,ij->i", w, n_j), np.einsum("ij,ij->i", u, n_j))
    return alpha, phi, theta, dist, valid


def _bin_indices(alpha, phi, theta):
    ba = np.clip(np.floor((alpha + 1.0) / 2.0 * BINS), 0, BINS - 1).astype(np.int64)
    bp = np.clip(np.floor((phi + 1.0) / 2.0 * BINS), 0, BINS - 1).astype(np.int64)
    bt = np.clip(np.floor((theta + np.pi) / (2.0 * np.pi) * BINS), 0, BINS - 1).astype(np.int64)
    return ba, bp, bt


def _normalize_blocks(h: np.ndarray) -> np.ndarray:
    out = h.copy()
    for b in range(3):
        block = out[:, b * BINS:(b + 1) * BINS]
        s = block.sum(axis=1, keepdims=True)
        np.divide(block, s, out=block, where=s > 0)
        block *= 100.0
    return out


def _spfh_from_neighbors(p_i, n_i, p_j, n_j) -> np.ndarray:
    alpha, phi, theta, _, valid = _pair_angles(p_i, n_i, p_j, n_j)
    ba, bp, bt = _bin_indices(alpha[valid], phi[valid], theta[valid])
    h = np.zeros(DIM)
    np.add.at(h, ba, 1.0)
    np.add.at(h, BINS + bp, 1.0)
    np.add.at(h, 2 * BINS + bt, 1.0)
    return _normalize_blocks(h[None, :])[0]


def compute_spfh(cloud: PointCloud, index: SpatialIndex, point_idx: int,
                 radius: float) -> np.ndarray:
    """Simplified histogram of one point over its radius neighborhood."""
    if cloud.normals is None:
        raise ValueError("cloud has no normals")
    nbrs = [i for i, _ in radius_search(index, cloud.points[point_idx], radius)
            if i != point_idx]
    if not nbrs:
        return np.zeros(DIM)
    return _spfh_from_neighbors(cloud.points[point_idx], cloud.normals[point_idx],
                                cloud.points[nbrs], cloud.normals[nbrs])


def compute_fpfh(cloud: PointCloud, radius: float = 5.0) -> FeatureSet:
    """FPFH for every point: own SPFH plus the 1/distance-weighted mean of
    the neighbors' SPFHs, re-normalized per block.
    """
    if cloud.normals is None:
        raise ValueError("cloud has no normals")
    if radius <= 0:
        raise ValueError("radius must be > 0")
    n = len(cloud)
    pts, nrm = cloud.points, cloud.normals
    index = build_index(cloud)
    hoods = index.ball_batch(pts, radius)

    owner = np.repeat(np.arange(n), [h.size for h in hoods])
    member = np.concatenate(hoods) if hoods else np.zeros(0, dtype=np.int64)
    keep = owner != member
    owner, member = owner[keep], member[keep]

    alpha, phi, theta, dist, valid = _pair_angles(pts[owner], nrm[owner],
                                                  pts[member], nrm[member])
    vo = owner[valid]
    ba, bp, bt = _bin_indices(alpha[valid], phi[valid], theta[valid])
    spfh = np.zeros((n, DIM))
    for offset, bins in ((0, ba), (BINS, bp), (2 * BINS, bt)):
        flat = np.bincount(vo * DIM + offset + bins, minlength=n * DIM)
        spfh += flat.reshape(n, DIM)
    spfh = _normalize_blocks(spfh)

    # Weighted neighbor sum over positive-distance radius neighbors.
    pos = dist > 0
    wi, wj, wd = owner[pos], member[pos], 1.0 / dist[pos]
    k = np.bincount(wi, minlength=n).astype(np.float64)
    scale = np.where(k > 0, 1.0 / np.maximum(k, 1.0), 0.0)
    weights = sparse.csr_matrix((wd * scale[wi], (wi, wj)), shape=(n, n))
    fpfh = _normalize_blocks(spfh + weights @ spfh)

    fs = FeatureSet(fpfh, np.arange(n))
    validate_fpfh_blocks(fs)
    return fs


def write_feature_dump(fs: FeatureSet, path) -> None:
    """Binary descriptor dump: 16-byte header then (n, d) float32 LE.

    Also the import format for externally computed (e.g. learned) descriptors.
    """
    n, dim = fs.descriptors.shape
    data = _FEAT_HEADER.pack(FEAT_MAGIC, FEAT_VERSION, n, dim)
    data += fs.descriptors.astype("<f4").tobytes()
    Path(path).write_bytes(data)


def read_feature_dump(path) -> FeatureSet:
    raw = Path(path).read_bytes()
    if len(raw) < _FEAT_HEADER.size:
        raise ValueError("unrecognized format")
    magic, version, n, dim = _FEAT_HEADER.unpack_from(raw)
    if magic != FEAT_MAGIC or version != FEAT_VERSION:
        raise ValueError("unrecognized format")
    if len(raw) != _FEAT_HEADER.size + n * dim * 4:
        raise ValueError("size mismatch")
    desc = np.frombuffer(raw, dtype="<f4", offset=_FEAT_HEADER.size)
    return FeatureSet(desc.reshape(n, dim).astype(np.float64), np.arange(n))
