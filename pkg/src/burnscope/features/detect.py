"""Keypoint detection: DoG extrema, subpixel refinement, orientation assignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .scale_space import ScaleSpace

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class DetectParams:
    contrast_threshold: float = 0.03  # on [0, 1] intensities, after refinement
    edge_ratio: float = 10.0  # principal-curvature ratio gate
    border: int = 5
    max_refine_attempts: int = 5
    orientation_bins: int = 36
    orientation_sigma_factor: float = 1.5
    orientation_radius_factor: float = 3.0
    peak_ratio: float = 0.8  # histogram peaks >= this fraction of max spawn keypoints
    max_keypoints: int | None = None  # keep strongest-|response| if exceeded


@dataclass(frozen=True)
class Keypoint:
    x: float  # input-image pixels, subpixel
    y: float
    sigma: float  # detection scale in input-image pixels
    theta: float  # orientation, radians in [0, 2 pi)
    octave: int
    level: int  # gaussian level used for gradients
    response: float
    x_octave: float  # octave-local coordinates, used for description
    y_octave: float
    sigma_octave: float  # octave-local blur at the refined level

    def sort_key(self):
        return (self.octave, self.level, self.y, self.x, self.theta)


def _cube_gradient(cube: np.ndarray) -> np.ndarray:
    dx = 0.5 * (cube[1, 1, 2] - cube[1, 1, 0])
    dy = 0.5 * (cube[1, 2, 1] - cube[1, 0, 1])
    ds = 0.5 * (cube[2, 1, 1] - cube[0, 1, 1])
    return np.array([dx, dy, ds])


def _cube_hessian(cube: np.ndarray) -> np.ndarray:
    c = cube[1, 1, 1]
    dxx = cube[1, 1, 2] - 2 * c + cube[1, 1, 0]
    dyy = cube[1, 2, 1] - 2 * c + cube[1, 0, 1]
    dss = cube[2, 1, 1] - 2 * c + cube[0, 1, 1]
    dxy = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
    dxs = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0] - cube[0, 1, 2] + cube[0, 1, 0])
    dys = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1] - cube[0, 2, 1] + cube[0, 0, 1])
    return np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])


def _refine_extremum(dog: np.ndarray, level: int, row: int, col: int, params: DetectParams):
    """Quadratic-fit localization; returns (level, row, col, offset, value) or None."""
    n_levels, height, width = dog.shape
    for _ in range(params.max_refine_attempts):
        cube = dog[level - 1 : level + 2, row - 1 : row + 2, col - 1 : col + 2]
        gradient = _cube_gradient(cube)
        hessian = _cube_hessian(cube)
        try:
            offset = -np.linalg.lstsq(hessian, gradient, rcond=None)[0]
        except np.linalg.LinAlgError:
            return None
        if np.all(np.abs(offset) < 0.5):
            value = cube[1, 1, 1] + 0.5 * float(gradient @ offset)
            if abs(value) < params.contrast_threshold:
                return None
            dxx, dxy, dyy = hessian[0, 0], hessian[0, 1], hessian[1, 1]
            trace = dxx + dyy
            det = dxx * dyy - dxy * dxy
            r = params.edge_ratio
            if det <= 0 or trace * trace * r >= det * (r + 1) ** 2:
                return None
            return level, row, col, offset, value
        col += int(round(offset[0]))
        row += int(round(offset[1]))
        level += int(round(offset[2]))
        if (
            level < 1
            or level > n_levels - 2
            or row < params.border
            or row >= height - params.border
            or col < params.border
            or col >= width - params.border
        ):
            return None
    return None


def _orientation_histogram(
    image: np.ndarray, cx: int, cy: int, sigma: float, params: DetectParams
) -> np.ndarray:
    height, width = image.shape
    radius = max(int(round(params.orientation_radius_factor * sigma)), 1)
    y0 = max(cy - radius, 1)
    y1 = min(cy + radius, height - 2)
    x0 = max(cx - radius, 1)
    x1 = min(cx + radius, width - 2)
    if y1 < y0 or x1 < x0:
        return np.zeros(params.orientation_bins)

    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    dx = image[ys, xs + 1] - image[ys, xs - 1]
    dy = image[ys + 1, xs] - image[ys - 1, xs]
    magnitude = np.hypot(dx, dy)
    angle = np.mod(np.arctan2(dy, dx), TWO_PI)
    weight = np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * sigma * sigma))

    bins = params.orientation_bins
    idx = (angle / (TWO_PI / bins)).astype(np.int64) % bins
    hist = np.zeros(bins)
    np.add.at(hist, idx.ravel(), (weight * magnitude).ravel())

    # circular [1, 4, 6, 4, 1] / 16 smoothing
    smoothed = np.zeros(bins)
    for n in range(bins):
        smoothed[n] = (
            6 * hist[n]
            + 4 * (hist[n - 1] + hist[(n + 1) % bins])
            + hist[n - 2]
            + hist[(n + 2) % bins]
        ) / 16.0
    return smoothed


def _orientations(hist: np.ndarray, params: DetectParams) -> list:
    bins = len(hist)
    peak_max = hist.max()
    if peak_max <= 0:
        return []
    out = []
    left = np.roll(hist, 1)
    right = np.roll(hist, -1)
    peaks = np.flatnonzero((hist > left) & (hist > right) & (hist >= params.peak_ratio * peak_max))
    bin_width = TWO_PI / bins
    for i in peaks:
        l, c, r = hist[i - 1], hist[i], hist[(i + 1) % bins]
        denom = l - 2 * c + r
        offset = 0.0 if abs(denom) < 1e-12 else 0.5 * (l - r) / denom
        theta = ((i + 0.5 + offset) * bin_width) % TWO_PI
        out.append(float(theta))
    return out


def detect_keypoints(space: ScaleSpace, params: DetectParams = DetectParams()) -> list:
    """Extrema of the DoG stacks, refined to subpixel and given orientations.

    Each keypoint is a 26-neighbourhood extremum that survives the
    contrast and edge-response tests; every orientation-histogram peak
    at or above 80 % of the maximum spawns its own keypoint. The result
    is sorted by (octave, level, y, x, theta) for determinism.
    """
    pre_threshold = 0.5 * params.contrast_threshold
    keypoints: list[Keypoint] = []

    for octave_idx, dog in enumerate(space.dog):
        n_levels, height, width = dog.shape
        if height < 2 * params.border + 1 or width < 2 * params.border + 1:
            continue
        footprint = np.ones((3, 3, 3), dtype=bool)
        local_max = dog == ndimage.maximum_filter(dog, footprint=footprint, mode="constant", cval=np.inf)
        local_min = dog == ndimage.minimum_filter(dog, footprint=footprint, mode="constant", cval=-np.inf)
        candidates = (local_max & (dog > pre_threshold)) | (local_min & (dog < -pre_threshold))
        candidates[0] = candidates[-1] = False
        candidates[:, : params.border] = candidates[:, height - params.border :] = False
        candidates[:, :, : params.border] = candidates[:, :, width - params.border :] = False

        coord_scale = space.coordinate_scale(octave_idx)
        gaussians = space.octaves[octave_idx]
        seen: set[tuple] = set()
        for level, row, col in zip(*np.nonzero(candidates)):
            refined = _refine_extremum(dog, int(level), int(row), int(col), params)
            if refined is None:
                continue
            r_level, r_row, r_col, offset, value = refined
            key = (r_level, r_row, r_col)
            if key in seen:
                continue
            seen.add(key)

            x_oct = r_col + float(offset[0])
            y_oct = r_row + float(offset[1])
            level_f = r_level + float(offset[2])
            sigma_oct = space.level_sigma(level_f)
            image = gaussians[r_level]
            hist = _orientation_histogram(
                image, int(round(x_oct)), int(round(y_oct)), params.orientation_sigma_factor * sigma_oct, params
            )
            for theta in _orientations(hist, params):
                keypoints.append(
                    Keypoint(
                        x=x_oct * coord_scale,
                        y=y_oct * coord_scale,
                        sigma=sigma_oct * coord_scale,
                        theta=theta,
                        octave=octave_idx,
                        level=r_level,
                        response=abs(value),
                        x_octave=x_oct,
                        y_octave=y_oct,
                        sigma_octave=sigma_oct,
                    )
                )

    keypoints.sort(key=Keypoint.sort_key)
    if params.max_keypoints is not None and len(keypoints) > params.max_keypoints:
        by_response = sorted(
            keypoints, key=lambda kp: (-kp.response,) + kp.sort_key()
        )[: params.max_keypoints]
        keypoints = sorted(by_response, key=Keypoint.sort_key)
    return keypoints
