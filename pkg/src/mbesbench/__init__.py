"""Multibeam echo-sounder registration benchmark toolkit."""

from .core import (PointCloud, RigidTransform, apply_transform, compose, inverse,
                   transform_from_euler_z)
from .features import FeatureSet, compute_fpfh, compute_spfh
from .ingest import (DatasetManifest, PingTensor, Submap, build_submaps,
                     read_ping_tensor, split_dataset, write_ping_tensor)
from .metrics import (GridMap, MetricsReport, consistency_error,
                      feature_match_recall, grid_clouds, inlier_ratio,
                      is_recalled, rre, rte)
from .pairgen import (PairRecord, PairSpec, crop_halfplane, enumerate_pairs,
                      make_pair, sample_pair_transform)
from .preprocess import estimate_normals, random_cap, voxel_downsample
from .registration import (CorrespondenceSet, RegistrationResult, gicp, kabsch_fit,
                           match_features, ransac_registration)
from .spatial import SpatialIndex, build_index, knn, radius_search
from .terrain import TerrainConfig, generate_terrain_pings

__all__ = [
    "PointCloud", "RigidTransform", "apply_transform", "compose", "inverse",
    "transform_from_euler_z",
    "SpatialIndex", "build_index", "knn", "radius_search",
    "PingTensor", "Submap", "DatasetManifest", "read_ping_tensor",
    "write_ping_tensor", "build_submaps", "split_dataset",
    "PairSpec", "PairRecord", "crop_halfplane", "sample_pair_transform",
    "make_pair", "enumerate_pairs",
    "voxel_downsample", "random_cap", "estimate_normals",
    "FeatureSet", "compute_spfh", "compute_fpfh",
    "CorrespondenceSet", "RegistrationResult", "match_features", "kabsch_fit",
    "ransac_registration", "gicp",
    "GridMap", "MetricsReport", "grid_clouds", "consistency_error", "rre", "rte",
    "is_recalled", "inlier_ratio", "feature_match_recall",
    "TerrainConfig", "generate_terrain_pings",
]

__version__ = "0.1.0"
