"""Camera registration from 2D-3D correspondences (DLT resection + RANSAC)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateGeometryError, InsufficientMatchesError
from .bundle import observation_jacobian, robust_loss, robust_weight
from .camera import CameraIntrinsics, CameraPose, rotation_from_axis_angle


@dataclass
class ResectionParams:
    max_iterations: int = 500
    threshold_px: float = 3.0
    min_inliers: int = 6


def _pose_from_dlt(points: np.ndarray, normalized: np.ndarray) -> CameraPose:
    """[R | t] from >= 6 correspondences in normalized camera coordinates."""
    n = len(points)
    a = np.zeros((2 * n, 12))
    for i, (X, x) in enumerate(zip(points, normalized)):
        Xh = np.hstack([X, 1.0])
        a[2 * i, 0:4] = Xh
        a[2 * i, 8:12] = -x[0] * Xh
        a[2 * i + 1, 4:8] = Xh
        a[2 * i + 1, 8:12] = -x[1] * Xh
    _, _, vt = np.linalg.svd(a)
    p = vt[-1].reshape(3, 4)
    m = p[:, :3]
    u, s, vtm = np.linalg.svd(m)
    scale = s.mean()
    if scale < 1e-12:
        raise DegenerateGeometryError("resection DLT produced a rank-deficient pose")
    rotation = u @ vtm
    sign = 1.0
    if np.linalg.det(rotation) < 0:
        rotation = -rotation
        sign = -1.0
    translation = sign * p[:, 3] / scale
    pose = CameraPose(rotation, translation)
    # The DLT solution is defined up to sign; pick the one placing the
    # majority of points in front of the camera.
    depths = pose.transform(points)[:, 2]
    if np.median(depths) < 0:
        pose = CameraPose(rotation, -translation)
        # negating t alone does not mirror the rotation; recheck depths
        if np.median(pose.transform(points)[:, 2]) < 0:
            raise DegenerateGeometryError("resection found no front-facing solution")
    return pose


def refine_pose(
    K: CameraIntrinsics,
    pose: CameraPose,
    points: np.ndarray,
    pixels: np.ndarray,
    iterations: int = 20,
    loss: str = "huber",
    loss_scale_px: float = 2.0,
) -> CameraPose:
    """Pose-only Levenberg-Marquardt on the robust reprojection objective."""
    points = np.asarray(points, dtype=np.float64)
    pixels = np.asarray(pixels, dtype=np.float64)
    rotation = np.array(pose.rotation)
    translation = np.array(pose.translation)
    damping = 1e-3

    def evaluate(rot, tr):
        p_cam = points @ rot.T + tr
        z = p_cam[:, 2]
        if (z <= 1e-9).any():
            return None, None, np.inf, None
        proj = np.column_stack(
            [
                (K.fx * p_cam[:, 0] + K.skew * p_cam[:, 1]) / z + K.cx,
                K.fy * p_cam[:, 1] / z + K.cy,
            ]
        )
        res = pixels - proj
        sq = np.sum(res**2, axis=1)
        return p_cam, res, float(robust_loss(sq, loss, loss_scale_px).sum()), sq

    p_cam, res, objective, sq = evaluate(rotation, translation)
    if not np.isfinite(objective):
        return CameraPose(rotation, translation)

    for _ in range(iterations):
        weights = robust_weight(sq, loss, loss_scale_px)
        h = np.zeros((6, 6))
        g = np.zeros(6)
        for i in range(len(points)):
            j_cam, _ = observation_jacobian(K, rotation, points[i], p_cam[i])
            h += weights[i] * (j_cam.T @ j_cam)
            g -= weights[i] * (j_cam.T @ res[i])
        stepped = False
        for _ in range(8):
            try:
                delta = np.linalg.solve(h + damping * np.diag(np.clip(np.diag(h), 1e-12, None)), g)
            except np.linalg.LinAlgError:
                damping *= 10
                continue
            cand_rot = rotation_from_axis_angle(delta[:3]) @ rotation
            cand_tr = translation + delta[3:]
            cand = evaluate(cand_rot, cand_tr)
            if cand[2] < objective:
                rotation, translation = cand_rot, cand_tr
                p_cam, res, objective, sq = cand
                damping = max(damping * 0.1, 1e-12)
                stepped = True
                break
            damping *= 10
        if not stepped:
            break
    return CameraPose(rotation, translation)


def resect_camera(
    K: CameraIntrinsics,
    points: np.ndarray,
    pixels: np.ndarray,
    params: ResectionParams = ResectionParams(),
    rng: np.random.Generator | None = None,
) -> tuple[CameraPose, np.ndarray]:
    """Robust pose for a new view from 3D points and their pixel observations."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    n = len(points)
    if n < 6:
        raise InsufficientMatchesError(f"resection needs >= 6 correspondences, got {n}")
    if rng is None:
        rng = np.random.default_rng()

    inv_k = K.inverse_matrix()
    hom = np.column_stack([pixels, np.ones(n)])
    normalized = (hom @ inv_k.T)[:, :2]

    best_inliers = np.empty(0, dtype=np.int64)
    best_pose = None
    for _ in range(params.max_iterations):
        sample = rng.choice(n, size=6, replace=False)
        try:
            pose = _pose_from_dlt(points[sample], normalized[sample])
        except (DegenerateGeometryError, np.linalg.LinAlgError):
            continue
        p_cam = pose.transform(points)
        z = p_cam[:, 2]
        ok = z > 1e-9
        proj = np.full((n, 2), np.inf)
        proj[ok, 0] = (K.fx * p_cam[ok, 0] + K.skew * p_cam[ok, 1]) / z[ok] + K.cx
        proj[ok, 1] = K.fy * p_cam[ok, 1] / z[ok] + K.cy
        err = np.linalg.norm(proj - pixels, axis=1)
        inliers = np.flatnonzero(ok & (err < params.threshold_px))
        if len(inliers) > len(best_inliers):
            best_inliers = inliers
            best_pose = pose
            if len(inliers) > 0.95 * n:
                break

    if best_pose is None or len(best_inliers) < params.min_inliers:
        raise DegenerateGeometryError(
            f"resection consensus too small ({len(best_inliers)} inliers)"
        )
    refined = refine_pose(K, best_pose, points[best_inliers], pixels[best_inliers])
    return refined, best_inliers
