"""Metric scale calibration from a known physical reference distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError, ZeroBaselineError
from ..mesh import LabeledMesh
from .camera import CameraPose
from .cloud import SparseCloud

MIN_MODEL_DISTANCE = 1e-12


@dataclass
class ScaleCalibration:
    """Scale factor from two reconstructed points spanning a known distance."""

    point1: np.ndarray  # model units
    point2: np.ndarray
    known_distance: float  # cm

    def __post_init__(self):
        self.point1 = np.asarray(self.point1, dtype=np.float64).reshape(3)
        self.point2 = np.asarray(self.point2, dtype=np.float64).reshape(3)
        if self.known_distance <= 0:
            raise ValidationError("known reference distance must be positive")

    @property
    def model_distance(self) -> float:
        return float(np.linalg.norm(self.point2 - self.point1))

    @property
    def scale_factor(self) -> float:
        d_m = self.model_distance
        if d_m < MIN_MODEL_DISTANCE:
            raise ZeroBaselineError("reference points coincide; zero model baseline")
        return self.known_distance / d_m


def apply_metric_scale(geometry, cal: ScaleCalibration):
    """Scale geometry into cm: vertices x s; cached areas/volumes are downstream.

    Accepts a SparseCloud, LabeledMesh, or raw (n, 3) array. Areas and
    volumes recomputed afterwards pick up the s^2 / s^3 laws
    automatically; nothing cached here survives scaling.
    """
    s = cal.scale_factor
    if isinstance(geometry, SparseCloud):
        return SparseCloud(
            points=geometry.points * s,
            observations=[list(o) for o in geometry.observations],
            units="cm",
        )
    if isinstance(geometry, LabeledMesh):
        return LabeledMesh(
            vertices=geometry.vertices * s,
            faces=geometry.faces.copy(),
            face_probability=geometry.face_probability.copy(),
            visibility_count=geometry.visibility_count.copy(),
            units="cm",
            label_threshold=geometry.label_threshold,
        )
    points = np.asarray(geometry, dtype=np.float64)
    return points * s


def scale_camera_pose(pose: CameraPose, s: float) -> CameraPose:
    """Camera pose consistent with world points scaled by ``s``.

    Scaling points X' = sX moves camera centers to sC, i.e. t' = s t;
    with that compensation every reprojection is unchanged.
    """
    return CameraPose(pose.rotation.copy(), pose.translation * s)
