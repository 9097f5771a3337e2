"""Ground-truthed registration pairs from overlapping submaps.

Each pair is built deterministically from a single 64-bit seed: the two
half-plane crops, the point-cap subsamples, and the sampled rigid transform
all derive their own streams from it, so a (data, seed) pair regenerates
bit-identically anywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PointCloud, RigidTransform, apply_transform, inverse, transform_from_euler_z
from .ingest import DatasetManifest, Submap
from .preprocess import random_cap
from .seeds import derive_seed

NOMINAL_OVERLAPS = (0.2, 0.4, 0.6, 0.8, 1.0)
# Two independent 70% crops keep ~0.7 * 0.7 = 49% of the original overlap.
CROP_FACTOR = 0.49

DEFAULT_YAW_RANGE = (0.0, 10.0)
DEFAULT_XY_RANGE = (-40.0, 40.0)
DEFAULT_Z_RANGE = (-2.0, 2.0)


@dataclass(frozen=True)
class PairSpec:
    ref_submap_id: int
    src_submap_id: int
    nominal_overlap: float
    effective_overlap: float
    seed: int

    def __post_init__(self):
        if self.nominal_overlap not in NOMINAL_OVERLAPS:
            raise ValueError(f"nominal overlap {self.nominal_overlap} not in {NOMINAL_OVERLAPS}")

    @property
    def pair_id(self) -> str:
        return f"{self.ref_submap_id:05d}_{self.src_submap_id:05d}"

    @property
    def overlap_bin_pct(self) -> int:
        """Reporting bin: 50/40/30/20/10% effective overlap."""
        return int(round(self.nominal_overlap * 50))


@dataclass(frozen=True)
class PairRecord:
    spec: PairSpec
    ref_cloud: PointCloud
    src_cloud: PointCloud
    gt_transform: RigidTransform


def _crop_along(points: np.ndarray, direction: np.ndarray, retain: float) -> np.ndarray:
    """Indices (ascending) of the ceil(retain * n) points with the largest
    projection onto direction; projection ties break by lower index."""
    n = points.shape[0]
    keep = int(np.ceil(retain * n))
    proj = points[:, :2] @ direction[:2]
    order = np.argsort(proj, kind="stable")
    return np.sort(order[n - keep:])


def crop_halfplane(cloud: PointCloud, retain: float = 0.7, seed: int = 0) -> PointCloud:
    """Keep the retain-fraction of points on one side of a seeded random
    half-plane in XY. Exactly ceil(retain * n) points survive; z is untouched.
    """
    if not (0.0 < retain <= 1.0):
        raise ValueError("retain must be in (0, 1]")
    if len(cloud) == 0:
        raise ValueError("empty cloud")
    if retain == 1.0:
        return cloud
    theta = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi)
    d = np.array([np.cos(theta), np.sin(theta), 0.0])
    keep = _crop_along(cloud.points, d, retain)
    nrm = None if cloud.normals is None else cloud.normals[keep]
    return PointCloud(cloud.points[keep], nrm)


def sample_pair_transform(seed: int,
                          yaw_range: tuple[float, float] = DEFAULT_YAW_RANGE,
                          xy_range: tuple[float, float] = DEFAULT_XY_RANGE,
                          z_range: tuple[float, float] = DEFAULT_Z_RANGE) -> RigidTransform:
    """Z-axis rotation and translation drawn uniformly from the given ranges
    (XY-axis rotations stay identity). Draw order: yaw, tx, ty, tz.
    """
    for lo, hi in (yaw_range, xy_range, z_range):
        if lo > hi:
            raise ValueError("range not well-ordered")
    rng = np.random.default_rng(seed)
    yaw = rng.uniform(*yaw_range)
    tx = rng.uniform(*xy_range)
    ty = rng.uniform(*xy_range)
    tz = rng.uniform(*z_range)
    return transform_from_euler_z(yaw, (tx, ty, tz))


def gt_for_spec(spec: PairSpec,
                yaw_range=DEFAULT_YAW_RANGE, xy_range=DEFAULT_XY_RANGE,
                z_range=DEFAULT_Z_RANGE) -> RigidTransform:
    """The pair's ground-truth transform, derivable from the seed alone."""
    return sample_pair_transform(derive_seed(spec.seed, "tf"), yaw_range, xy_range, z_range)


def make_pair(ref_submap: Submap, src_submap: Submap, spec: PairSpec,
              retain: float = 0.7, max_points: int = 10000,
              yaw_range=DEFAULT_YAW_RANGE, xy_range=DEFAULT_XY_RANGE,
              z_range=DEFAULT_Z_RANGE, noise_sigma: float = 0.0) -> PairRecord:
    """Assemble one registration problem from two preprocessed submaps.

    Both submaps are taken into the reference submap's recentered frame,
    cropped and capped independently, and the source is displaced by the
    inverse of the sampled transform, so gt_transform maps src_cloud back
    onto ref_cloud. noise_sigma > 0 adds iid Gaussian jitter to both clouds
    (off by default; the ground truth is then only approximate).
    """
    if len(ref_submap.cloud) == 0 or len(src_submap.cloud) == 0:
        raise ValueError("degenerate crop")
    shift = src_submap.centroid_offset - ref_submap.centroid_offset
    src_cloud = PointCloud(src_submap.cloud.points + shift)

    ref_c = crop_halfplane(ref_submap.cloud, retain, derive_seed(spec.seed, "ref"))
    src_c = crop_halfplane(src_cloud, retain, derive_seed(spec.seed, "src"))
    ref_c = random_cap(ref_c, max_points, derive_seed(spec.seed, "cap-ref"))
    src_c = random_cap(src_c, max_points, derive_seed(spec.seed, "cap-src"))

    gt = sample_pair_transform(derive_seed(spec.seed, "tf"), yaw_range, xy_range, z_range)
    src_moved = apply_transform(src_c, inverse(gt))

    if noise_sigma > 0:
        ref_rng = np.random.default_rng(derive_seed(spec.seed, "noise-ref"))
        src_rng = np.random.default_rng(derive_seed(spec.seed, "noise-src"))
        ref_c = PointCloud(ref_c.points + ref_rng.normal(0, noise_sigma, ref_c.points.shape))
        src_moved = PointCloud(src_moved.points + src_rng.normal(0, noise_sigma, src_moved.points.shape))

    return PairRecord(spec, ref_c, src_moved, gt)


def steps_for_overlap(nominal: float, window: int, step: int) -> int:
    return int(round((1.0 - nominal) * window / step))


def enumerate_pairs(manifest: DatasetManifest, overlaps, base_seed: int) -> list[PairSpec]:
    """Pair every submap i with partner i + k(overlap) when the partner is in
    the same split; k = round((1 - overlap) * window / step), so k = 0 gives
    self-pairs at 100% nominal overlap.
    """
    ids = set(manifest.ids)
    if not ids:
        raise ValueError("empty manifest")
    out = []
    for i in sorted(ids):
        for nominal in sorted(overlaps, reverse=True):
            k = steps_for_overlap(nominal, manifest.window, manifest.step)
            j = i + k
            if j in ids:
                out.append(PairSpec(i, j, nominal, nominal * CROP_FACTOR,
                                    derive_seed(base_seed, i, k)))
    return out


def write_pair_manifest(pairs: list[tuple[PairSpec, RigidTransform]], path) -> None:
    """JSON lines, one pair per line, ground truth stored explicitly."""
    with open(path, "w") as f:
        for spec, gt in pairs:
            doc = {
                "pair_id": spec.pair_id,
                "ref_id": spec.ref_submap_id,
                "src_id": spec.src_submap_id,
                "nominal_overlap": spec.nominal_overlap,
                "effective_overlap": spec.effective_overlap,
                "seed": spec.seed,
                "gt": {"R": [float(v) for v in spec_gt_rotation(gt)],
                       "t": [float(v) for v in gt.translation]},
            }
            f.write(json.dumps(doc, sort_keys=True) + "\n")


def spec_gt_rotation(gt: RigidTransform) -> list[float]:
    """Rotation as 9 doubles, row-major."""
    return gt.rotation.reshape(9).tolist()


def read_pair_manifest(path) -> list[tuple[PairSpec, RigidTransform]]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        spec = PairSpec(doc["ref_id"], doc["src_id"], doc["nominal_overlap"],
                        doc["effective_overlap"], doc["seed"])
        gt = RigidTransform(np.asarray(doc["gt"]["R"]).reshape(3, 3),
                            np.asarray(doc["gt"]["t"]))
        out.append((spec, gt))
    return out
