"""Gaussian scale space and its difference-of-Gaussian stacks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..errors import DegenerateInputError
from ..quality import ImageBuffer

MIN_IMAGE_SIDE = 32
MIN_OCTAVE_SIDE = 8


@dataclass(frozen=True)
class ScaleSpaceParams:
    num_octaves: int = 4
    scales_per_octave: int = 3  # s; k = 2^(1/s)
    base_sigma: float = 1.6
    assumed_blur: float = 0.5  # blur already present in the input
    upsample: bool = False  # double the input before octave 0


@dataclass
class ScaleSpace:
    """Per-octave Gaussian stacks L and their pairwise differences D.

    Each octave holds ``scales_per_octave + 3`` Gaussian levels so that
    extrema can be localized across a full octave of DoG levels.
    """

    octaves: list  # [(levels, H, W) float64]
    dog: list  # [(levels - 1, H, W)]
    base_sigma: float
    k: float
    scales_per_octave: int
    upsampled: bool
    input_shape: tuple

    def level_sigma(self, level: float) -> float:
        """Blur at a (possibly fractional) level, in octave-local pixels."""
        return self.base_sigma * self.k**level

    def coordinate_scale(self, octave: int) -> float:
        """Multiplier taking octave-local pixel coordinates to input pixels."""
        scale = 2.0**octave
        return scale / 2.0 if self.upsampled else scale

    def absolute_sigma(self, octave: int, level: float) -> float:
        """Blur expressed in input-image pixels."""
        return self.level_sigma(level) * self.coordinate_scale(octave)

    @property
    def num_octaves(self) -> int:
        return len(self.octaves)


def _upsample2(image: np.ndarray) -> np.ndarray:
    return ndimage.zoom(image, 2.0, order=1, mode="nearest", grid_mode=True)


def build_scale_space(
    image, params: ScaleSpaceParams = ScaleSpaceParams()
) -> ScaleSpace:
    """Blur-and-subtract pyramid over ``num_octaves`` octaves.

    Octave 0 level 0 is the (optionally doubled) input brought up to
    ``base_sigma``; each level above multiplies the blur by k = 2^(1/s).
    Every next octave starts from the level whose blur is 2x the base,
    downsampled by striding.
    """
    if isinstance(image, ImageBuffer):
        data = image.as_unit_float()
    else:
        data = np.asarray(image, dtype=np.float64)
        if data.max() > 1.5:
            data = data / 255.0
    if min(data.shape) < MIN_IMAGE_SIDE:
        raise DegenerateInputError(
            f"image {data.shape[1]}x{data.shape[0]} below minimum {MIN_IMAGE_SIDE}px side"
        )

    s = params.scales_per_octave
    k = 2.0 ** (1.0 / s)
    levels = s + 3

    base = data
    assumed = params.assumed_blur
    if params.upsample:
        base = _upsample2(base)
        assumed *= 2.0
    initial_delta = np.sqrt(max(params.base_sigma**2 - assumed**2, 0.01))
    base = ndimage.gaussian_filter(base, initial_delta, mode="nearest")

    # incremental blurs between consecutive levels
    deltas = [
        np.sqrt((params.base_sigma * k**lv) ** 2 - (params.base_sigma * k ** (lv - 1)) ** 2)
        for lv in range(1, levels)
    ]

    octaves = []
    dogs = []
    current = base
    for _ in range(params.num_octaves):
        if min(current.shape) < MIN_OCTAVE_SIDE:
            break
        stack = np.empty((levels, *current.shape))
        stack[0] = current
        for lv in range(1, levels):
            stack[lv] = ndimage.gaussian_filter(stack[lv - 1], deltas[lv - 1], mode="nearest")
        octaves.append(stack)
        dogs.append(stack[1:] - stack[:-1])
        current = stack[s][::2, ::2]

    return ScaleSpace(
        octaves=octaves,
        dog=dogs,
        base_sigma=params.base_sigma,
        k=k,
        scales_per_octave=s,
        upsampled=params.upsample,
        input_shape=data.shape,
    )
