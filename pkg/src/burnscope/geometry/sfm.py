"""Incremental structure from motion over a matched multi-view feature set.

Initialization picks the pair maximizing inlier count x median
triangulation angle; remaining views register by robust 2D-3D
resection. The final reconstruction is re-gauged so the lowest
registered view sits at the identity pose, which makes the output frame
predictable for downstream consumers (scale calibration, painting).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateGeometryError, InsufficientMatchesError
from .bundle import BundleOptions, bundle_adjust
from .camera import CameraIntrinsics, CameraPose, project_points
from .cloud import SparseCloud
from .resection import ResectionParams, resect_camera
from .triangulate import triangulate_point, triangulation_angle
from .twoview import RansacParams, estimate_two_view_pose


@dataclass
class SfmParams:
    ransac: RansacParams = field(default_factory=RansacParams)
    resection: ResectionParams = field(default_factory=ResectionParams)
    bundle: BundleOptions = field(default_factory=BundleOptions)
    min_pair_matches: int = 30
    min_triangulation_angle_rad: float = 0.015
    max_point_reprojection_px: float = 2.5
    min_resection_points: int = 8
    candidate_init_pairs: int = 28  # evaluate this many pairs (by match count)
    bundle_every_n_views: int = 2


@dataclass
class SfmResult:
    views: dict  # view index -> (CameraIntrinsics, CameraPose)
    cloud: SparseCloud
    track_points: dict  # track id -> point index
    mean_reprojection_px: float
    median_reprojection_px: float
    inlier_ratio: float  # aggregate over verified pairs
    n_images: int


class _Tracks:
    """Union-find over (view, keypoint) nodes connected by pair matches."""

    def __init__(self):
        self.parent: dict = {}

    def find(self, node):
        root = node
        while self.parent.setdefault(root, root) != root:
            root = self.parent[root]
        while self.parent[node] != root:
            self.parent[node], node = root, self.parent[node]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def groups(self) -> dict:
        out: dict = {}
        for node in self.parent:
            out.setdefault(self.find(node), []).append(node)
        return out


def build_tracks(pair_matches: dict) -> list:
    """Feature tracks from pairwise matches, dropping view-conflicting tracks.

    ``pair_matches`` maps (view_a, view_b) to an (n, 2) array of
    keypoint index pairs. A track that sees two different keypoints in
    the same view is contaminated and discarded whole.
    """
    uf = _Tracks()
    for (va, vb), pairs in pair_matches.items():
        for ka, kb in pairs:
            uf.union((va, int(ka)), (vb, int(kb)))
    tracks = []
    for members in uf.groups().values():
        views = [v for v, _ in members]
        if len(set(views)) != len(views) or len(members) < 2:
            continue
        tracks.append(sorted(members))
    tracks.sort()
    return tracks


def run_incremental_sfm(
    keypoint_pixels: dict,
    pair_matches: dict,
    intrinsics: dict,
    params: SfmParams = SfmParams(),
    rng: np.random.Generator | None = None,
) -> SfmResult:
    """Reconstruct cameras and a sparse cloud from matched keypoints.

    ``keypoint_pixels``: view -> (n, 2) pixel coordinates per keypoint.
    ``pair_matches``: (view_a, view_b) -> (m, 2) keypoint index pairs.
    ``intrinsics``: view -> CameraIntrinsics.
    """
    if rng is None:
        rng = np.random.default_rng()
    views = sorted(keypoint_pixels)
    if len(views) < 2:
        raise InsufficientMatchesError("incremental SfM needs at least two views")

    tracks = build_tracks(pair_matches)
    if not tracks:
        raise InsufficientMatchesError("no multi-view tracks survive matching")
    # fast lookup: (view, keypoint) -> track id
    node_track: dict = {}
    for tid, members in enumerate(tracks):
        for node in members:
            node_track[node] = tid

    # ------------------------------------------------------------------
    # choose the initialization pair: inlier count x median triangulation angle
    pair_stats = sorted(
        pair_matches.items(), key=lambda kv: -len(kv[1])
    )[: params.candidate_init_pairs]
    best = None
    inlier_counts: list[tuple[int, int]] = []
    for (va, vb), pairs in pair_stats:
        if len(pairs) < params.min_pair_matches:
            continue
        pa = keypoint_pixels[va][pairs[:, 0]]
        pb = keypoint_pixels[vb][pairs[:, 1]]
        try:
            two = estimate_two_view_pose(
                pa, pb, intrinsics[va], intrinsics[vb], params.ransac, rng
            )
        except DegenerateGeometryError:
            continue
        inlier_counts.append((len(two.inliers), len(pairs)))
        pose_a = CameraPose.identity()
        angles = []
        sample = two.inliers[:: max(len(two.inliers) // 40, 1)]
        for idx in sample:
            try:
                point, err = triangulate_point(
                    [pa[idx], pb[idx]],
                    [(intrinsics[va], pose_a), (intrinsics[vb], two.pose)],
                )
            except Exception:
                continue
            angles.append(triangulation_angle(point, pose_a, two.pose))
        if not angles:
            continue
        score = len(two.inliers) * float(np.median(angles))
        if best is None or score > best[0]:
            best = (score, va, vb, two, pairs)
    if best is None:
        raise DegenerateGeometryError("no view pair supports two-view initialization")
    _, va, vb, two, pairs = best

    poses: dict = {va: CameraPose.identity(), vb: two.pose}
    track_points: dict = {}
    points: list = []

    def try_triangulate(tid: int) -> None:
        """(Re)triangulate a track from all registered observations."""
        members = [(v, k) for v, k in tracks[tid] if v in poses]
        if len(members) < 2:
            return
        obs = [keypoint_pixels[v][k] for v, k in members]
        cams = [(intrinsics[v], poses[v]) for v, _ in members]
        try:
            point, err = triangulate_point(
                obs, cams, min_angle_rad=params.min_triangulation_angle_rad
            )
        except Exception:
            return
        if err > params.max_point_reprojection_px:
            return
        # cheirality in every observing camera
        for _, pose in cams:
            if pose.transform(point[None, :])[0, 2] <= 1e-9:
                return
        if tid in track_points:
            points[track_points[tid]] = point
        else:
            track_points[tid] = len(points)
            points.append(point)

    for ka, kb in pairs[two.inliers]:
        tid = node_track.get((va, int(ka)))
        if tid is not None:
            try_triangulate(tid)

    def run_bundle() -> None:
        nonlocal points, poses
        view_order = sorted(poses)
        cam_of = {v: i for i, v in enumerate(view_order)}
        cam_idx, pt_idx, pixels = [], [], []
        for tid, pidx in track_points.items():
            for v, k in tracks[tid]:
                if v in poses:
                    cam_idx.append(cam_of[v])
                    pt_idx.append(pidx)
                    pixels.append(keypoint_pixels[v][k])
        if not cam_idx:
            return
        result = bundle_adjust(
            np.array(points),
            [(intrinsics[v], poses[v]) for v in view_order],
            (np.array(cam_idx), np.array(pt_idx), np.array(pixels)),
            params.bundle,
        )
        points = [p for p in result.points]
        for v, (K, pose) in zip(view_order, result.cameras):
            poses[v] = pose

    run_bundle()

    # ------------------------------------------------------------------
    # register remaining views by 2D-3D resection, most-correspondences first
    remaining = [v for v in views if v not in poses]
    registered_since_bundle = 0
    while remaining:
        counts = []
        for v in remaining:
            n = sum(
                1
                for tid, pidx in track_points.items()
                for tv, tk in tracks[tid]
                if tv == v
            )
            counts.append((n, v))
        counts.sort(key=lambda c: (-c[0], c[1]))
        n_corr, view = counts[0]
        if n_corr < params.min_resection_points:
            break  # remaining views share too little structure
        pts3d, pix = [], []
        for tid, pidx in track_points.items():
            for tv, tk in tracks[tid]:
                if tv == view:
                    pts3d.append(points[pidx])
                    pix.append(keypoint_pixels[view][tk])
        try:
            pose, inliers = resect_camera(
                intrinsics[view], np.array(pts3d), np.array(pix), params.resection, rng
            )
        except DegenerateGeometryError:
            remaining.remove(view)
            continue
        poses[view] = pose
        remaining.remove(view)
        # triangulate tracks newly observable from this view
        for tid in range(len(tracks)):
            if any(tv == view for tv, _ in tracks[tid]):
                try_triangulate(tid)
        registered_since_bundle += 1
        if registered_since_bundle >= params.bundle_every_n_views:
            run_bundle()
            registered_since_bundle = 0

    run_bundle()

    # prune observations... final quality pass: drop points whose mean error is high
    keep: dict = {}
    final_points: list = []
    for tid, pidx in track_points.items():
        members = [(v, k) for v, k in tracks[tid] if v in poses]
        errs = []
        for v, k in members:
            proj, depth = project_points(intrinsics[v], poses[v], np.array(points[pidx])[None, :])
            if depth[0] <= 0:
                errs.append(np.inf)
            else:
                errs.append(float(np.linalg.norm(proj[0] - keypoint_pixels[v][k])))
        if np.mean(errs) <= params.max_point_reprojection_px:
            keep[tid] = len(final_points)
            final_points.append(points[pidx])
    track_points = keep
    points = final_points
    run_bundle()

    # ------------------------------------------------------------------
    # re-gauge: lowest registered view at the identity
    anchor = min(poses)
    anchor_pose = poses[anchor]
    r_a = anchor_pose.rotation
    t_a = anchor_pose.translation
    points = [r_a @ p + t_a for p in points]
    for v in list(poses):
        pose = poses[v]
        poses[v] = CameraPose(pose.rotation @ r_a.T, pose.translation - pose.rotation @ r_a.T @ t_a)

    observations = []
    for tid, pidx in sorted(track_points.items(), key=lambda kv: kv[1]):
        obs = [
            (v, tuple(np.asarray(keypoint_pixels[v][k], dtype=float)))
            for v, k in tracks[tid]
            if v in poses
        ]
        observations.append(obs)
    cloud = SparseCloud(points=np.array(points), observations=observations)

    errs = []
    for tid, pidx in track_points.items():
        for v, k in tracks[tid]:
            if v not in poses:
                continue
            proj, depth = project_points(intrinsics[v], poses[v], cloud.points[pidx][None, :])
            if depth[0] > 0:
                errs.append(float(np.linalg.norm(proj[0] - keypoint_pixels[v][k])))
    errs = np.array(errs) if errs else np.array([np.inf])

    total_inliers = sum(n for n, _ in inlier_counts)
    total_matches = sum(m for _, m in inlier_counts)
    return SfmResult(
        views={v: (intrinsics[v], poses[v]) for v in poses},
        cloud=cloud,
        track_points=dict(track_points),
        mean_reprojection_px=float(errs.mean()),
        median_reprojection_px=float(np.median(errs)),
        inlier_ratio=total_inliers / total_matches if total_matches else 0.0,
        n_images=len(poses),
    )
