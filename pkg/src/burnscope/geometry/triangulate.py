"""Linear (DLT) triangulation of image observations into 3D points."""

from __future__ import annotations

import numpy as np

from ..errors import LowParallaxError, ValidationError
from .camera import CameraPose, cast_pixel_ray, project_points

MIN_RAY_ANGLE_RAD = 1e-4


def triangulate_point(
    observations: list,
    cameras: list,
    min_angle_rad: float = MIN_RAY_ANGLE_RAD,
) -> tuple[np.ndarray, float]:
    """DLT solution minimizing algebraic error, plus its mean reprojection error.

    ``observations`` pairs with ``cameras``: pixel (u, v) per
    (CameraIntrinsics, CameraPose). Rays closer to parallel than
    ``min_angle_rad`` cannot be intersected reliably.
    """
    if len(observations) < 2 or len(observations) != len(cameras):
        raise ValidationError("triangulation needs >= 2 paired observations")

    rays = [cast_pixel_ray(K, pose, px) for px, (K, pose) in zip(observations, cameras)]
    max_angle = 0.0
    for i in range(len(rays)):
        for j in range(i + 1, len(rays)):
            cosang = float(np.clip(rays[i].direction @ rays[j].direction, -1.0, 1.0))
            max_angle = max(max_angle, float(np.arccos(cosang)))
    if max_angle < min_angle_rad:
        raise LowParallaxError(
            f"max ray angle {max_angle:.2e} rad below {min_angle_rad:.0e}"
        )

    rows = []
    for pixel, (K, pose) in zip(observations, cameras):
        p = K.matrix() @ np.hstack([pose.rotation, pose.translation[:, None]])
        u, v = float(pixel[0]), float(pixel[1])
        rows.append(u * p[2] - p[0])
        rows.append(v * p[2] - p[1])
    a = np.array(rows)
    _, _, vt = np.linalg.svd(a)
    hom = vt[-1]
    if abs(hom[3]) < 1e-15:
        raise LowParallaxError("triangulated point at infinity")
    point = hom[:3] / hom[3]

    errs = []
    for pixel, (K, pose) in zip(observations, cameras):
        proj, depth = project_points(K, pose, point[None, :])
        if depth[0] <= 0 or not np.isfinite(proj).all():
            errs.append(np.inf)
        else:
            errs.append(float(np.linalg.norm(proj[0] - np.asarray(pixel, dtype=np.float64))))
    return point, float(np.mean(errs))


def triangulation_angle(
    point: np.ndarray, pose_a: CameraPose, pose_b: CameraPose
) -> float:
    """Angle in radians subtended at the point by the two camera centers."""
    da = pose_a.center() - point
    db = pose_b.center() - point
    na = np.linalg.norm(da)
    nb = np.linalg.norm(db)
    if na < 1e-12 or nb < 1e-12:
        return 0.0
    return float(np.arccos(np.clip(da @ db / (na * nb), -1.0, 1.0)))
