"""128-D gradient-histogram descriptors over oriented keypoint neighbourhoods."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detect import Keypoint, TWO_PI
from .scale_space import ScaleSpace

WINDOW_WIDTH = 4  # spatial cells per side
ORIENTATION_BINS = 8
CELL_SIZE_FACTOR = 3.0  # cell side in units of the keypoint's blur
COMPONENT_CLAMP = 0.2
NORM_EPSILON = 1e-12


@dataclass
class DescriptorResult:
    """Descriptors plus the mapping back to the keypoints that produced them."""

    descriptors: np.ndarray  # (m, 128) float64, rows L2-normalized
    keypoint_indices: np.ndarray  # (m,) index into the input keypoint list
    skipped: list  # keypoint indices whose support window exits the image


def _describe(image: np.ndarray, kp: Keypoint) -> np.ndarray | None:
    height, width = image.shape
    cell = CELL_SIZE_FACTOR * kp.sigma_octave
    half_width = int(round(cell * np.sqrt(2.0) * (WINDOW_WIDTH + 1) * 0.5))
    cy = int(round(kp.y_octave))
    cx = int(round(kp.x_octave))
    if (
        cy - half_width < 1
        or cy + half_width > height - 2
        or cx - half_width < 1
        or cx + half_width > width - 2
    ):
        return None  # support window exits the image

    offsets = np.arange(-half_width, half_width + 1)
    rr, cc = np.meshgrid(offsets, offsets, indexing="ij")
    cos_t = np.cos(kp.theta)
    sin_t = np.sin(kp.theta)
    # rotate sample offsets into the keypoint frame
    c_rot = cc * cos_t + rr * sin_t
    r_rot = -cc * sin_t + rr * cos_t
    r_bin = r_rot / cell + 0.5 * WINDOW_WIDTH - 0.5
    c_bin = c_rot / cell + 0.5 * WINDOW_WIDTH - 0.5
    inside = (r_bin > -1) & (r_bin < WINDOW_WIDTH) & (c_bin > -1) & (c_bin < WINDOW_WIDTH)
    if not inside.any():
        return None

    ys = rr[inside] + cy
    xs = cc[inside] + cx
    dx = image[ys, xs + 1] - image[ys, xs - 1]
    dy = image[ys + 1, xs] - image[ys - 1, xs]
    magnitude = np.hypot(dx, dy)
    angle = np.mod(np.arctan2(dy, dx) - kp.theta, TWO_PI)

    r_bin = r_bin[inside]
    c_bin = c_bin[inside]
    o_bin = angle / (TWO_PI / ORIENTATION_BINS)
    weight = np.exp(
        -((r_rot[inside] / cell) ** 2 + (c_rot[inside] / cell) ** 2)
        / (2.0 * (0.5 * WINDOW_WIDTH) ** 2)
    )
    value = magnitude * weight

    r0 = np.floor(r_bin).astype(np.int64)
    c0 = np.floor(c_bin).astype(np.int64)
    o0 = np.floor(o_bin).astype(np.int64)
    fr = r_bin - r0
    fc = c_bin - c0
    fo = o_bin - o0
    o0 = o0 % ORIENTATION_BINS

    hist = np.zeros((WINDOW_WIDTH + 2, WINDOW_WIDTH + 2, ORIENTATION_BINS))
    for dr in (0, 1):
        wr = value * (fr if dr else 1.0 - fr)
        for dc in (0, 1):
            wc = wr * (fc if dc else 1.0 - fc)
            for do in (0, 1):
                w = wc * (fo if do else 1.0 - fo)
                np.add.at(hist, (r0 + 1 + dr, c0 + 1 + dc, (o0 + do) % ORIENTATION_BINS), w)

    vector = hist[1:-1, 1:-1, :].reshape(-1)
    norm = np.linalg.norm(vector)
    if norm < NORM_EPSILON:
        return None
    vector = vector / norm
    np.clip(vector, None, COMPONENT_CLAMP, out=vector)
    vector /= max(np.linalg.norm(vector), NORM_EPSILON)
    return vector


def compute_descriptors(space: ScaleSpace, keypoints: list) -> DescriptorResult:
    """Descriptors for localized keypoints; out-of-image windows are skipped.

    Each descriptor covers a 4x4 grid of spatial cells with 8
    orientation bins per cell; gradients are rotated into the keypoint
    frame, binned trilinearly, clamped at 0.2 and renormalized.
    """
    descriptors = []
    kept = []
    skipped = []
    for idx, kp in enumerate(keypoints):
        image = space.octaves[kp.octave][kp.level]
        vector = _describe(image, kp)
        if vector is None:
            skipped.append(idx)
        else:
            descriptors.append(vector)
            kept.append(idx)
    stacked = (
        np.vstack(descriptors) if descriptors else np.empty((0, WINDOW_WIDTH**2 * ORIENTATION_BINS))
    )
    return DescriptorResult(
        descriptors=stacked,
        keypoint_indices=np.array(kept, dtype=np.int64),
        skipped=skipped,
    )
