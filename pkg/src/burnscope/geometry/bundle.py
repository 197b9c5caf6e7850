"""Levenberg-Marquardt bundle adjustment with a robust reprojection loss.

Cameras and points are refined jointly; the gauge is fixed by freezing
the first camera's pose and renormalizing the scene scale about that
camera's center so the first baseline keeps its initial length (a pure
gauge motion: it leaves every reprojection unchanged).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import DegenerateGeometryError, NumericalFailureError, ValidationError
from .camera import CameraIntrinsics, CameraPose, rotation_from_axis_angle

MIN_DEPTH = 1e-9


@dataclass
class BundleOptions:
    loss: str = "huber"  # "huber" | "cauchy" | "squared"
    loss_scale_px: float = 2.0
    max_iterations: int = 100
    initial_damping: float = 1e-3
    damping_increase: float = 10.0
    damping_decrease: float = 0.1
    max_damping: float = 1e12
    relative_tolerance: float = 1e-10
    absolute_floor_px2: float = 1e-18  # per-observation squared-px floor
    refine_focal: bool = False


@dataclass
class BundleResult:
    cameras: list  # [(CameraIntrinsics, CameraPose)]
    points: np.ndarray
    initial_objective: float
    final_objective: float
    initial_mean_reprojection_px: float
    mean_reprojection_px: float
    median_reprojection_px: float
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list)


def robust_loss(sq_norms: np.ndarray, loss: str, scale: float) -> np.ndarray:
    """rho(s) for s = squared residual norm, in px^2."""
    if loss == "squared":
        return sq_norms
    delta_sq = scale * scale
    if loss == "huber":
        out = sq_norms.copy()
        big = sq_norms > delta_sq
        out[big] = 2.0 * scale * np.sqrt(sq_norms[big]) - delta_sq
        return out
    if loss == "cauchy":
        return delta_sq * np.log1p(sq_norms / delta_sq)
    raise ValidationError(f"unknown robust loss {loss!r}")


def robust_weight(sq_norms: np.ndarray, loss: str, scale: float) -> np.ndarray:
    """rho'(s): the IRLS weight applied to each observation."""
    if loss == "squared":
        return np.ones_like(sq_norms)
    delta_sq = scale * scale
    if loss == "huber":
        out = np.ones_like(sq_norms)
        big = sq_norms > delta_sq
        out[big] = scale / np.sqrt(sq_norms[big])
        return out
    if loss == "cauchy":
        return 1.0 / (1.0 + sq_norms / delta_sq)
    raise ValidationError(f"unknown robust loss {loss!r}")


def _orthonormalize(rotation: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rotation)
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


class _State:
    """Mutable optimization state: rotations, translations, focals, points."""

    def __init__(self, cameras, points, refine_focal: bool):
        self.K_base = [K for K, _ in cameras]
        self.rotations = [np.array(p.rotation, dtype=np.float64) for _, p in cameras]
        self.translations = [np.array(p.translation, dtype=np.float64) for _, p in cameras]
        self.focal_scale = np.ones(len(cameras))
        self.points = np.array(points, dtype=np.float64)
        self.refine_focal = refine_focal

    def copy(self) -> "_State":
        dup = _State.__new__(_State)
        dup.K_base = self.K_base
        dup.rotations = [r.copy() for r in self.rotations]
        dup.translations = [t.copy() for t in self.translations]
        dup.focal_scale = self.focal_scale.copy()
        dup.points = self.points.copy()
        dup.refine_focal = self.refine_focal
        return dup

    def intrinsics(self, cam: int) -> CameraIntrinsics:
        base = self.K_base[cam]
        s = self.focal_scale[cam]
        if s == 1.0:
            return base
        return CameraIntrinsics(base.fx * s, base.fy * s, base.cx, base.cy, base.skew)

    def cameras(self) -> list:
        return [
            (self.intrinsics(i), CameraPose(self.rotations[i], self.translations[i]))
            for i in range(len(self.rotations))
        ]


def _residuals(state: _State, cam_idx, pt_idx, pixels):
    """Per-observation residuals (m, 2) and camera-frame points (m, 3)."""
    n_cam = len(state.rotations)
    p_cam = np.empty((len(cam_idx), 3))
    proj = np.empty((len(cam_idx), 2))
    for c in range(n_cam):
        mask = cam_idx == c
        if not mask.any():
            continue
        pts = state.points[pt_idx[mask]]
        pc = pts @ state.rotations[c].T + state.translations[c]
        p_cam[mask] = pc
        K = state.intrinsics(c)
        z = pc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            proj[mask, 0] = (K.fx * pc[:, 0] + K.skew * pc[:, 1]) / z + K.cx
            proj[mask, 1] = K.fy * pc[:, 1] / z + K.cy
    return pixels - proj, p_cam


def _objective(residuals, p_cam, options: BundleOptions) -> tuple[float, np.ndarray]:
    if not np.isfinite(residuals).all():
        raise NumericalFailureError("non-finite reprojection residual")
    if (p_cam[:, 2] <= MIN_DEPTH).any():
        return np.inf, np.zeros(len(residuals))
    sq = np.sum(residuals**2, axis=1)
    return float(robust_loss(sq, options.loss, options.loss_scale_px).sum()), sq


def observation_jacobian(K: CameraIntrinsics, rotation, point, p_cam):
    """d(residual)/d(cam 6-vector [omega, t]) and d(residual)/d(point), analytic.

    Increments: R <- exp([omega]x) R, t <- t + dt, X <- X + dX. The
    residual is (observed - projected), hence the leading minus sign.
    """
    x, y, z = p_cam
    inv_z = 1.0 / z
    a = np.array(
        [
            [K.fx * inv_z, K.skew * inv_z, -(K.fx * x + K.skew * y) * inv_z * inv_z],
            [0.0, K.fy * inv_z, -K.fy * y * inv_z * inv_z],
        ]
    )
    rx = rotation @ point  # p_cam without translation
    d_omega = np.array(
        [
            [0.0, rx[2], -rx[1]],
            [-rx[2], 0.0, rx[0]],
            [rx[1], -rx[0], 0.0],
        ]
    )  # -[R X]x
    j_cam = -a @ np.hstack([d_omega, np.eye(3)])
    j_point = -a @ rotation
    return j_cam, j_point


def _focal_jacobian(state: _State, cam: int, p_cam):
    base = state.K_base[cam]
    x, y, z = p_cam
    return -np.array([base.fx * x / z, base.fy * y / z])


def bundle_adjust(
    points: np.ndarray,
    cameras: list,
    observations: tuple,
    options: BundleOptions = BundleOptions(),
    fixed_cameras: set | frozenset = frozenset({0}),
) -> BundleResult:
    """Minimize the robust reprojection objective over cameras and points.

    ``observations`` is (camera_indices, point_indices, pixels). The
    cameras in ``fixed_cameras`` keep their poses; camera 0 must be
    among them (it anchors the gauge).
    """
    cam_idx, pt_idx, pixels = observations
    cam_idx = np.asarray(cam_idx, dtype=np.int64)
    pt_idx = np.asarray(pt_idx, dtype=np.int64)
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    if len(cameras) < 2:
        raise ValidationError("bundle adjustment needs >= 2 cameras")
    if len(cam_idx) != len(pt_idx) or len(cam_idx) != len(pixels):
        raise ValidationError("observation arrays must have equal length")

    state = _State(cameras, points, options.refine_focal)
    n_cam = len(cameras)
    n_pts = len(state.points)

    residuals, p_cam = _residuals(state, cam_idx, pt_idx, pixels)
    if (p_cam[:, 2] <= MIN_DEPTH).any():
        raise DegenerateGeometryError(
            f"{int((p_cam[:, 2] <= MIN_DEPTH).sum())} observation(s) start behind their camera"
        )
    objective, sq = _objective(residuals, p_cam, options)
    initial_objective = objective
    initial_mean_px = float(np.mean(np.sqrt(sq)))

    free_cams = [c for c in range(n_cam) if c not in fixed_cameras]
    cam_col = {c: i * 6 for i, c in enumerate(free_cams)}
    focal_col0 = len(free_cams) * 6
    # focal refinement applies to every camera: the gauge freezes poses only
    focal_col = (
        {c: focal_col0 + i for i, c in enumerate(range(n_cam))}
        if options.refine_focal
        else {}
    )
    point_col0 = focal_col0 + len(focal_col)
    n_params = point_col0 + 3 * n_pts

    # gauge anchors: camera 0's center and the first baseline length
    anchor_center = CameraPose(state.rotations[0], state.translations[0]).center()
    other = 1 if n_cam > 1 else 0
    baseline0 = np.linalg.norm(
        CameraPose(state.rotations[other], state.translations[other]).center()
        - anchor_center
    )

    damping = options.initial_damping
    trace: list[float] = []
    converged = False
    iterations = 0
    objective_floor = options.absolute_floor_px2 * max(len(cam_idx), 1)

    while iterations < options.max_iterations:
        if objective <= objective_floor:
            converged = True
            break
        iterations += 1
        weights = robust_weight(sq, options.loss, options.loss_scale_px)

        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        vals: list[np.ndarray] = []
        for i in range(len(cam_idx)):
            c = int(cam_idx[i])
            p = int(pt_idx[i])
            K = state.intrinsics(c)
            j_cam, j_point = observation_jacobian(
                K, state.rotations[c], state.points[p], p_cam[i]
            )
            r0 = 2 * i
            if c in cam_col:
                base = cam_col[c]
                for dr in range(2):
                    rows.append(np.full(6, r0 + dr))
                    cols.append(np.arange(base, base + 6))
                    vals.append(j_cam[dr])
            if c in focal_col:
                j_focal = _focal_jacobian(state, c, p_cam[i])
                for dr in range(2):
                    rows.append(np.array([r0 + dr]))
                    cols.append(np.array([focal_col[c]]))
                    vals.append(np.array([j_focal[dr]]))
            pbase = point_col0 + 3 * p
            for dr in range(2):
                rows.append(np.full(3, r0 + dr))
                cols.append(np.arange(pbase, pbase + 3))
                vals.append(j_point[dr])

        jac = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * len(cam_idx), n_params),
        )
        w_rep = np.repeat(weights, 2)
        jw = jac.multiply(w_rep[:, None]).tocsr()
        hessian = (jac.T @ jw).tocsc()
        # solve (H + lambda D) delta = -J^T W r
        gradient = -(jac.T @ (w_rep * residuals.reshape(-1)))
        diag = hessian.diagonal()
        diag = np.where(diag > 1e-12, diag, 1e-12)

        accepted = False
        while damping <= options.max_damping:
            lhs = hessian + sp.diags(damping * diag)
            try:
                delta = spla.spsolve(lhs.tocsc(), gradient)
            except Exception:
                damping *= options.damping_increase
                continue
            if not np.isfinite(delta).all():
                damping *= options.damping_increase
                continue

            candidate = state.copy()
            for c in free_cams:
                base = cam_col[c]
                omega = delta[base : base + 3]
                candidate.rotations[c] = _orthonormalize(
                    rotation_from_axis_angle(omega) @ candidate.rotations[c]
                )
                candidate.translations[c] = candidate.translations[c] + delta[base + 3 : base + 6]
            for c, col in focal_col.items():
                candidate.focal_scale[c] += delta[col]
            candidate.points = candidate.points + delta[point_col0:].reshape(-1, 3)

            cand_res, cand_p_cam = _residuals(candidate, cam_idx, pt_idx, pixels)
            cand_obj, cand_sq = _objective(cand_res, cand_p_cam, options)
            if cand_obj <= objective:
                rel_decrease = (objective - cand_obj) / max(objective, 1e-300)
                # gauge: rescale about camera 0's center so the first baseline
                # keeps its initial length (leaves all reprojections unchanged)
                if baseline0 > 0:
                    c_other = CameraPose(
                        candidate.rotations[other], candidate.translations[other]
                    ).center()
                    cur = np.linalg.norm(c_other - anchor_center)
                    if cur > 1e-12:
                        g = baseline0 / cur
                        candidate.points = anchor_center + g * (candidate.points - anchor_center)
                        for c in range(1, n_cam):  # camera 0 anchors the motion
                            center = CameraPose(
                                candidate.rotations[c], candidate.translations[c]
                            ).center()
                            new_center = anchor_center + g * (center - anchor_center)
                            candidate.translations[c] = -candidate.rotations[c] @ new_center
                        cand_res, cand_p_cam = _residuals(candidate, cam_idx, pt_idx, pixels)
                        cand_obj, cand_sq = _objective(cand_res, cand_p_cam, options)

                state = candidate
                residuals, p_cam, sq = cand_res, cand_p_cam, cand_sq
                objective = cand_obj
                trace.append(objective)
                damping = max(damping * options.damping_decrease, 1e-12)
                accepted = True
                if rel_decrease < options.relative_tolerance or objective <= objective_floor:
                    converged = True
                break
            if abs(cand_obj - objective) / max(objective, 1e-300) < options.relative_tolerance:
                converged = True
                break
            damping *= options.damping_increase

        if converged or not accepted:
            if not accepted and not converged:
                converged = damping > options.max_damping and bool(trace)
            break

    errors_px = np.sqrt(sq)
    return BundleResult(
        cameras=state.cameras(),
        points=state.points,
        initial_objective=initial_objective,
        final_objective=objective,
        initial_mean_reprojection_px=initial_mean_px,
        mean_reprojection_px=float(errors_px.mean()),
        median_reprojection_px=float(np.median(errors_px)),
        iterations=iterations,
        converged=converged,
        objective_trace=trace,
    )
