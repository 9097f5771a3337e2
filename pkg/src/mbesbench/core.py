"""Rigid-transform algebra and the point-cloud value type shared by all modules.

Rotations are stored as explicit 3x3 matrices (double precision throughout);
all values are immutable after construction and every operation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ROTATION_TOL = 1e-9
NORMAL_TOL = 1e-6


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) element: proper rotation plus translation in meters.

    The constructor validates orthonormality and det = +1 to 1e-9; inputs
    that only approximately satisfy this (e.g. matrices parsed from text)
    should go through :meth:`from_arrays`, which re-orthonormalizes by
    polar projection first.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = _readonly(np.asarray(self.rotation).reshape(3, 3))
        t = _readonly(np.asarray(self.translation).reshape(3))
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise ValueError("non-finite transform")
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err >= ROTATION_TOL:
            raise ValueError(f"rotation not orthonormal (|R'R - I|_max = {err:.3e})")
        det = float(np.linalg.det(r))
        if abs(det - 1.0) >= ROTATION_TOL:
            raise ValueError(f"rotation determinant {det:.12f} != +1 (reflection?)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @classmethod
    def from_arrays(cls, rotation, translation) -> "RigidTransform":
        """Build from untrusted input, re-orthonormalizing the rotation.

        Polar projection via SVD: the closest orthogonal matrix to the input.
        Raises if the input is closer to a reflection than to a rotation.
        """
        r = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
        if not np.isfinite(r).all():
            raise ValueError("non-finite rotation")
        u, _, vt = np.linalg.svd(r)
        proper = u @ vt
        if np.linalg.det(proper) < 0:
            raise ValueError("input rotation is a reflection")
        return cls(proper, np.asarray(translation, dtype=np.float64).reshape(3))

    def to_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


@dataclass(frozen=True)
class PointCloud:
    """Unordered 3D points (n, 3) with optional per-point unit normals.

    All coordinates are finite doubles in meters; arrays are frozen after
    construction so clouds can be shared between workers.
    """

    points: np.ndarray
    normals: np.ndarray | None = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.isfinite(pts).all():
            raise ValueError("non-finite point coordinates")
        object.__setattr__(self, "points", _readonly(pts))
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if nrm.shape[0] != pts.shape[0]:
                raise ValueError("normals length mismatch")
            lens = np.linalg.norm(nrm, axis=1)
            if nrm.size and np.abs(lens - 1.0).max() >= NORMAL_TOL:
                raise ValueError("normals not unit length")
            object.__setattr__(self, "normals", _readonly(nrm))

    def __len__(self) -> int:
        return self.points.shape[0]


def apply_transform(cloud: PointCloud, t: RigidTransform) -> PointCloud:
    """Apply R p + t to every point; normals (if any) are rotated only."""
    pts = cloud.points @ t.rotation.T + t.translation
    nrm = None if cloud.normals is None else cloud.normals @ t.rotation.T
    return PointCloud(pts, nrm)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform applying b first, then a: (a o b)(p) = a(b(p))."""
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation)


def inverse(t: RigidTransform) -> RigidTransform:
    return RigidTransform(t.rotation.T, -(t.rotation.T @ t.translation))


def transform_from_euler_z(yaw_deg: float, translation) -> RigidTransform:
    """Rotation about +Z by yaw_deg degrees plus a translation."""
    if not math.isfinite(yaw_deg):
        raise ValueError("non-finite yaw")
    a = math.radians(yaw_deg)
    c, s = math.cos(a), math.sin(a)
    r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return RigidTransform(r, np.asarray(translation, dtype=np.float64).reshape(3))
