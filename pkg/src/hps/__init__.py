"""Homogeneous part segmentation and inertial parameter identification from stop-and-go wrenches."""
from .errors import HPSError
from .geom import CellComplex, PointCloud, TriMesh, VoxelGrid
from .identify import IdentResult, WrenchSample, identify_hps, identify_ols
from .inertia import InertialParams, Pose
from .segment import SegmentParams, SegmentationResult, segment_object
from .synth import ObjectSpec, PartSpec, build_object, builtin_specs

__all__ = [
    "HPSError", "CellComplex", "PointCloud", "TriMesh", "VoxelGrid", "IdentResult", "WrenchSample",
    "identify_hps", "identify_ols", "InertialParams", "Pose", "SegmentParams", "SegmentationResult",
    "segment_object", "ObjectSpec", "PartSpec", "build_object", "builtin_specs",
]
