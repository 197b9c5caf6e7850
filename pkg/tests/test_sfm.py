"""Incremental reconstruction on the rendered synthetic capture."""

import numpy as np
import pytest

from burnscope.errors import InsufficientMatchesError
from burnscope.geometry.camera import cast_pixel_ray
from burnscope.geometry.sfm import SfmParams, build_tracks, run_incremental_sfm
from burnscope.longitudinal import rigid_fit_svd


def ground_truth_point(scene, view, pixel):
    """Exact surface point seen at a pixel, from the scene's analytic planes."""
    ray = cast_pixel_ray(scene.intrinsics, scene.poses[view], pixel)
    best_t, best = np.inf, None
    for plane in scene.planes:
        n = plane.normal()
        denom = ray.direction @ n
        if abs(denom) < 1e-12:
            continue
        t = ((plane.p0 - ray.origin) @ n) / denom
        if t <= 0 or t >= best_t:
            continue
        point = ray.at(t)
        rel = point - plane.p0
        u, v = rel @ plane.e1, rel @ plane.e2
        if 0 <= u <= plane.width and 0 <= v <= plane.height:
            best_t, best = t, point
    return best


def similarity_align_rms(estimated, truth):
    est_c = estimated - estimated.mean(0)
    tru_c = truth - truth.mean(0)
    s = np.sqrt((tru_c**2).sum() / (est_c**2).sum())
    T = rigid_fit_svd(estimated * s, truth)
    return s, T, np.sqrt(np.mean(np.sum((T.apply(estimated * s) - truth) ** 2, axis=1)))


class TestBuildTracks:
    def test_tracks_merge_across_pairs(self):
        pair_matches = {
            (0, 1): np.array([[3, 5]]),
            (1, 2): np.array([[5, 9]]),
        }
        tracks = build_tracks(pair_matches)
        assert tracks == [[(0, 3), (1, 5), (2, 9)]]

    def test_view_conflict_discards_track(self):
        pair_matches = {
            (0, 1): np.array([[3, 5]]),
            (0, 2): np.array([[4, 9]]),
            (1, 2): np.array([[5, 9]]),  # merges kp 3 and kp 4 of view 0
        }
        assert build_tracks(pair_matches) == []

    def test_no_views_raises(self):
        with pytest.raises(InsufficientMatchesError):
            run_incremental_sfm({0: np.zeros((0, 2))}, {}, {})


@pytest.fixture(scope="module")
def reconstruction(synthetic_capture):
    scene = synthetic_capture.scene()
    kp_pixels, pair_matches = synthetic_capture.features()
    intrinsics = {i: scene.intrinsics for i in kp_pixels}
    result = run_incremental_sfm(
        kp_pixels, pair_matches, intrinsics, SfmParams(), np.random.default_rng(0)
    )
    return scene, result


class TestIncrementalSfm:

    def test_all_views_registered(self, reconstruction):
        scene, result = reconstruction
        assert sorted(result.views) == list(range(len(scene.poses)))

    def test_reprojection_below_half_pixel(self, reconstruction):
        _, result = reconstruction
        assert result.mean_reprojection_px < 0.5

    def test_structure_matches_ground_truth(self, reconstruction):
        scene, result = reconstruction
        gt, est = [], []
        for idx, obs in enumerate(result.cloud.observations):
            view, pixel = obs[0]
            point = ground_truth_point(scene, view, pixel)
            if point is not None:
                gt.append(point)
                est.append(result.cloud.points[idx])
        gt = np.array(gt)
        est = np.array(est)
        assert len(gt) > 100
        _, _, rms = similarity_align_rms(est, gt)
        diameter = np.linalg.norm(gt.max(0) - gt.min(0))
        assert rms < 0.01 * diameter

    def test_anchor_view_at_identity(self, reconstruction):
        _, result = reconstruction
        anchor = min(result.views)
        _, pose = result.views[anchor]
        assert np.abs(pose.rotation - np.eye(3)).max() < 1e-12
        assert np.abs(pose.translation).max() < 1e-12

    def test_every_point_multiview(self, reconstruction):
        _, result = reconstruction
        result.cloud.validate(result.views.keys())

    def test_cloud_ply_round_trip(self, reconstruction):
        from burnscope.geometry.cloud import SparseCloud

        _, result = reconstruction
        text = result.cloud.to_ply()
        again = SparseCloud.from_ply(text)
        assert np.array_equal(again.points, result.cloud.points)
        assert again.units == result.cloud.units
