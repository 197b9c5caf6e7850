"""Scale-invariant keypoint detection, description, and ratio-test matching."""

from .scale_space import ScaleSpace, ScaleSpaceParams, build_scale_space
from .detect import DetectParams, Keypoint, detect_keypoints
from .descriptor import DescriptorResult, compute_descriptors
from .match import Match, match_descriptors

__all__ = [
    "ScaleSpace",
    "ScaleSpaceParams",
    "build_scale_space",
    "DetectParams",
    "Keypoint",
    "detect_keypoints",
    "DescriptorResult",
    "compute_descriptors",
    "Match",
    "match_descriptors",
]
