"""Pinhole camera model: intrinsics, pose, projection, and pixel rays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BehindCameraError, ValidationError

MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValidationError("focal lengths must be positive")

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.fx, self.skew, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )

    def inverse_matrix(self) -> np.ndarray:
        return np.linalg.inv(self.matrix())

    def to_list(self) -> list:
        return [self.fx, self.fy, self.cx, self.cy, self.skew]

    @classmethod
    def from_list(cls, raw) -> "CameraIntrinsics":
        fx, fy, cx, cy, skew = raw
        return cls(fx=fx, fy=fy, cx=cx, cy=cy, skew=skew)


@dataclass
class CameraPose:
    """World-to-camera transform: X_cam = R X_world + t."""

    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))

    def check_rotation(self, tol: float = 1e-9) -> None:
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > tol or abs(np.linalg.det(self.rotation) - 1.0) > tol:
            raise ValidationError("pose rotation is not a proper rotation matrix")

    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def transform(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def compose_world_motion(self, rotation: np.ndarray, translation: np.ndarray) -> "CameraPose":
        """Pose observing the same scene after world points move by X -> R X + t."""
        rotation = np.asarray(rotation, dtype=np.float64)
        translation = np.asarray(translation, dtype=np.float64)
        return CameraPose(
            self.rotation @ rotation.T,
            self.translation - self.rotation @ rotation.T @ translation,
        )


def project_point(K: CameraIntrinsics, pose: CameraPose, point) -> np.ndarray:
    """Homogeneous projection x = K [R | t] X, dehomogenized to pixels."""
    p_cam = pose.rotation @ np.asarray(point, dtype=np.float64) + pose.translation
    if p_cam[2] <= MIN_DEPTH:
        raise BehindCameraError(f"point has depth {p_cam[2]:.3g} <= {MIN_DEPTH}")
    u = (K.fx * p_cam[0] + K.skew * p_cam[1]) / p_cam[2] + K.cx
    v = K.fy * p_cam[1] / p_cam[2] + K.cy
    return np.array([u, v])


def project_points(K: CameraIntrinsics, pose: CameraPose, points: np.ndarray) -> tuple:
    """Vectorized projection; returns (pixels, depths) without the depth guard."""
    p_cam = pose.transform(points)
    z = p_cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (K.fx * p_cam[:, 0] + K.skew * p_cam[:, 1]) / z + K.cx
        v = K.fy * p_cam[:, 1] / z + K.cy
    return np.column_stack([u, v]), z


@dataclass(frozen=True)
class Ray:
    """Half-line from a camera center through a pixel, direction normalized."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        direction = np.asarray(self.direction, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(direction)
        if norm < 1e-12:
            raise ValidationError("ray direction must be nonzero")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction / norm)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


def cast_pixel_ray(K: CameraIntrinsics, pose: CameraPose, pixel) -> Ray:
    """World-space ray through a pixel: origin at the camera center."""
    pixel = np.asarray(pixel, dtype=np.float64)
    homogeneous = np.array([pixel[0], pixel[1], 1.0])
    direction_cam = K.inverse_matrix() @ homogeneous
    direction_world = pose.rotation.T @ direction_cam
    return Ray(origin=pose.center(), direction=direction_world)


def rotation_from_axis_angle(axis_angle: np.ndarray) -> np.ndarray:
    """Rodrigues map from an axis-angle vector to a rotation matrix."""
    w = np.asarray(axis_angle, dtype=np.float64).reshape(3)
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        k = skew_matrix(w)
        return np.eye(3) + k + 0.5 * k @ k
    k = skew_matrix(w / theta)
    return np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)


def skew_matrix(v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def look_at_pose(center: np.ndarray, target: np.ndarray, up=(0.0, 1.0, 0.0)) -> CameraPose:
    """World-to-camera pose for a camera at ``center`` looking toward ``target``.

    Camera convention: +z forward, +x right, +y down (image row direction).
    """
    center = np.asarray(center, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - center
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValidationError("camera center and target coincide")
    forward = forward / norm
    upv = np.asarray(up, dtype=np.float64)
    right = np.cross(forward, upv)
    if np.linalg.norm(right) < 1e-9:
        upv = np.array([0.0, 0.0, 1.0]) if abs(forward[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        right = np.cross(forward, upv)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    rotation = np.vstack([right, down, forward])
    return CameraPose(rotation, -rotation @ center)
