"""Camera geometry, two-view initialization, triangulation, bundle adjustment,
incremental reconstruction, and metric scale calibration."""

from .camera import CameraIntrinsics, CameraPose, cast_pixel_ray, project_point
from .cloud import SparseCloud
from .scale import ScaleCalibration, apply_metric_scale

__all__ = [
    "CameraIntrinsics",
    "CameraPose",
    "project_point",
    "cast_pixel_ray",
    "SparseCloud",
    "ScaleCalibration",
    "apply_metric_scale",
]
