"""The benchmark's metric suite.

Three families: gridded map consistency plus predicted overlap, transform
accuracy (RRE / RTE / recall), and feature-correspondence quality (inlier
ratio / feature match recall). Consistency realizes surface thickness at
grid scale: per-cell absolute difference of mean depths, RMS-aggregated
over the cells hit by both clouds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PointCloud, RigidTransform, apply_transform
from .registration import CorrespondenceSet

DEFAULT_CELL_SIZE = 2.0
DEFAULT_RRE_MAX_DEG = 5.0
DEFAULT_RTE_MAX_M = 10.0
DEFAULT_IR_MIN = 0.05


@dataclass(frozen=True)
class GridMap:
    """Joint 2D binning of two clouds: cell -> (z values from a, from b)."""

    cell_size: float
    origin: np.ndarray
    cells: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]


def _cell_keys(points: np.ndarray, origin: np.ndarray, cell_size: float) -> np.ndarray:
    return np.floor((points[:, :2] - origin) / cell_size).astype(np.int64)


def grid_clouds(a: PointCloud, b: PointCloud, cell_size: float = DEFAULT_CELL_SIZE) -> GridMap:
    """Bin both clouds in XY on a shared grid anchored at their joint minimum."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty cloud")
    origin = np.minimum(a.points[:, :2].min(axis=0), b.points[:, :2].min(axis=0))
    cells: dict[tuple[int, int], tuple[list, list]] = {}
    for which, cloud in ((0, a), (1, b)):
        keys = _cell_keys(cloud.points, origin, cell_size)
        for (ix, iy), z in zip(map(tuple, keys.tolist()), cloud.points[:, 2]):
            cells.setdefault((ix, iy), ([], []))[which].append(z)
    frozen = {k: (np.asarray(za), np.asarray(zb)) for k, (za, zb) in cells.items()}
    return GridMap(cell_size, origin, frozen)


def _mean_z_per_cell(points: np.ndarray, inv: np.ndarray, n_cells: int):
    counts = np.bincount(inv, minlength=n_cells)
    sums = np.bincount(inv, weights=points[:, 2], minlength=n_cells)
    return counts, sums


def consistency_error(ref: PointCloud, src: PointCloud, t: RigidTransform,
                      cell_size: float = DEFAULT_CELL_SIZE) -> tuple[float | None, float]:
    """(consistency in meters, predicted overlap %) for src registered by t.

    Consistency is the RMS over both-hit cells of |mean z_ref - mean z_src|;
    overlap is the percentage of occupied cells hit by both clouds. With no
    both-hit cell the consistency is undefined (None) and overlap is 0.
    """
    if len(ref) == 0 or len(src) == 0:
        raise ValueError("empty cloud")
    moved = apply_transform(src, t)
    origin = np.minimum(ref.points[:, :2].min(axis=0), moved.points[:, :2].min(axis=0))
    keys = np.vstack([_cell_keys(ref.points, origin, cell_size),
                      _cell_keys(moved.points, origin, cell_size)])
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv_ref, inv_src = inv[:len(ref)], inv[len(ref):]
    n_cells = len(uniq)
    cnt_r, sum_r = _mean_z_per_cell(ref.points, inv_ref, n_cells)
    cnt_s, sum_s = _mean_z_per_cell(moved.points, inv_src, n_cells)
    both = (cnt_r > 0) & (cnt_s > 0)
    overlap_pct = 100.0 * both.sum() / n_cells
    if not both.any():
        return None, 0.0
    err = sum_r[both] / cnt_r[both] - sum_s[both] / cnt_s[both]
    return float(np.sqrt(np.mean(err * err))), float(overlap_pct)


def rre(gt: RigidTransform, pred: RigidTransform) -> float:
    """Relative rotation error in degrees (geodesic angle)."""
    c = (np.trace(gt.rotation.T @ pred.rotation) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def rte(gt: RigidTransform, pred: RigidTransform) -> float:
    """Relative translation error in meters."""
    return float(np.linalg.norm(pred.translation - gt.translation))


def is_recalled(gt: RigidTransform, pred: RigidTransform,
                rre_max: float = DEFAULT_RRE_MAX_DEG,
                rte_max: float = DEFAULT_RTE_MAX_M) -> bool:
    return rre(gt, pred) <= rre_max and rte(gt, pred) <= rte_max


def inlier_ratio(src_cloud: PointCloud, ref_cloud: PointCloud,
                 corr: CorrespondenceSet, gt: RigidTransform,
                 thresh: float = 2.0) -> float:
    """Fraction of correspondences landing within thresh under ground truth."""
    if len(corr) == 0:
        raise ValueError("empty correspondences")
    s = src_cloud.points[corr.src_indices] @ gt.rotation.T + gt.translation
    d = np.linalg.norm(s - ref_cloud.points[corr.ref_indices], axis=1)
    return float((d <= thresh).mean())


def feature_match_recall(inlier_ratios, ir_min: float = DEFAULT_IR_MIN) -> float:
    """Fraction of pairs whose inlier ratio reaches ir_min (inclusive)."""
    irs = list(inlier_ratios)
    if not irs:
        raise ValueError("empty inlier ratio list")
    return sum(1 for v in irs if v >= ir_min) / len(irs)


@dataclass(frozen=True)
class MetricsReport:
    """Per-pair scores; metric fields are None where not applicable
    (failed registration, or feature metrics for feature-free methods)."""

    pair_id: str
    effective_overlap: float
    method: str
    success: bool
    consistency_m: float | None
    overlap_pct: float | None
    rre_deg: float | None
    rte_m: float | None
    recalled: bool
    inlier_ratio: float | None

    def __post_init__(self):
        if self.recalled and not self.success:
            raise ValueError("recalled implies success")


CSV_FIELDS = ["pair_id", "effective_overlap", "method", "success", "consistency_m",
              "overlap_pct", "rre_deg", "rte_m", "recalled", "inlier_ratio"]


def write_metrics_csv(reports: list[MetricsReport], path) -> None:
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_FIELDS)
        for r in reports:
            w.writerow([fmt(getattr(r, k)) for k in CSV_FIELDS])


def read_metrics_csv(path) -> list[MetricsReport]:
    out = []
    with open(path, newline="") as f:
        r = csv.DictReader(f)
        if r.fieldnames != CSV_FIELDS:
            raise ValueError("unexpected metrics csv columns")
        for row in r:
            out.append(MetricsReport(
                pair_id=row["pair_id"],
                effective_overlap=float(row["effective_overlap"]),
                method=row["method"],
                success=row["success"] == "true",
                consistency_m=float(row["consistency_m"]) if row["consistency_m"] else None,
                overlap_pct=float(row["overlap_pct"]) if row["overlap_pct"] else None,
                rre_deg=float(row["rre_deg"]) if row["rre_deg"] else None,
                rte_m=float(row["rte_m"]) if row["rte_m"] else None,
                recalled=row["recalled"] == "true",
                inlier_ratio=float(row["inlier_ratio"]) if row["inlier_ratio"] else None,
            ))
    return out
