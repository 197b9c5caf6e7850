"""Image ingestion, pre-reconstruction quality gating, and confidence scoring.

Images are gated before any reconstruction is attempted: resolution,
blur (variance of the discrete Laplacian), and exposure screening.
After reconstruction, the same module turns pipeline indicators into a
single logistic confidence score.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from .errors import DegenerateInputError, ValidationError

# 3x3 discrete Laplacian stencil, applied to interior pixels only.
LAPLACIAN_KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)

# Count used to normalize the image-count confidence term: frame
# extraction caps multi-view sets at about this many frames.
FULL_SCALE_IMAGE_COUNT = 15

# Pixel error at which the reprojection confidence term bottoms out.
REPROJECTION_NORM_PX = 2.0


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit grayscale image; color inputs are converted by standard luma weighting."""

    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ValidationError("image must be a non-empty 2-D intensity grid")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValidationError("intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def as_float(self) -> np.ndarray:
        """Intensities as float64 in [0, 255]."""
        return self.pixels.astype(np.float64)

    def as_unit_float(self) -> np.ndarray:
        """Intensities as float64 in [0, 1]."""
        return self.pixels.astype(np.float64) / 255.0

    @classmethod
    def from_bytes(cls, data: bytes) -> "ImageBuffer":
        """Decode PNG or baseline JPEG bytes; color converts via ITU-R 601 luma."""
        with Image.open(io.BytesIO(data)) as img:
            gray = img.convert("L")
            return cls(np.asarray(gray, dtype=np.uint8))

    @classmethod
    def from_file(cls, path) -> "ImageBuffer":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="L").save(buf, format="PNG")
        return buf.getvalue()


@dataclass(frozen=True)
class QcPolicy:
    """Thresholds for the per-image and set-level quality gates."""

    min_width: int = 800
    min_height: int = 600
    blur_threshold: float = 100.0
    under_exposure_mean: float = 40.0
    over_exposure_mean: float = 215.0
    min_images: int = 6

    @classmethod
    def from_dict(cls, raw: dict) -> "QcPolicy":
        known = {f: raw[f] for f in cls.__dataclass_fields__ if f in raw}
        return cls(**known)


@dataclass(frozen=True)
class QcVerdict:
    """Outcome of the per-image quality gate."""

    resolution_ok: bool
    laplacian_variance: float
    mean_intensity: float
    exposure_status: str  # "under" | "ok" | "over"
    accepted: bool
    reasons: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "resolution_ok": self.resolution_ok,
            "laplacian_variance": self.laplacian_variance,
            "mean_intensity": self.mean_intensity,
            "exposure_status": self.exposure_status,
            "accepted": self.accepted,
            "reasons": list(self.reasons),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "QcVerdict":
        return cls(
            resolution_ok=raw["resolution_ok"],
            laplacian_variance=raw["laplacian_variance"],
            mean_intensity=raw["mean_intensity"],
            exposure_status=raw["exposure_status"],
            accepted=raw["accepted"],
            reasons=tuple(raw.get("reasons", [])),
        )


@dataclass(frozen=True)
class SetVerdict:
    """Outcome of the whole-capture gate."""

    accepted: bool
    n_accepted: int
    reasons: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "n_accepted": self.n_accepted,
            "reasons": list(self.reasons),
        }


def laplacian_variance(image: ImageBuffer) -> float:
    """Variance of the 3x3 Laplacian response over interior pixels.

    Low variance means little high-frequency content, the signature of
    motion blur or defocus.
    """
    if image.height < 3 or image.width < 3:
        raise DegenerateInputError(
            f"image {image.width}x{image.height} has no interior pixels"
        )
    f = image.as_float()
    lap = (
        f[:-2, 1:-1] + f[2:, 1:-1] + f[1:-1, :-2] + f[1:-1, 2:] - 4.0 * f[1:-1, 1:-1]
    )
    return float(np.var(lap))


def assess_image(image: ImageBuffer, policy: QcPolicy = QcPolicy()) -> QcVerdict:
    """Gate a single image on resolution, blur, and exposure."""
    reasons: list[str] = []

    resolution_ok = image.width >= policy.min_width and image.height >= policy.min_height
    if not resolution_ok:
        reasons.append(
            f"resolution {image.width}x{image.height} below minimum "
            f"{policy.min_width}x{policy.min_height}"
        )

    try:
        blur = laplacian_variance(image)
    except DegenerateInputError:
        blur = 0.0
    if blur < policy.blur_threshold:
        reasons.append(
            f"laplacian variance {blur:.2f} below blur threshold {policy.blur_threshold:.2f}"
        )

    mean_intensity = float(np.mean(image.as_float()))
    if mean_intensity < policy.under_exposure_mean:
        exposure = "under"
        reasons.append(f"mean intensity {mean_intensity:.1f} indicates under-exposure")
    elif mean_intensity > policy.over_exposure_mean:
        exposure = "over"
        reasons.append(f"mean intensity {mean_intensity:.1f} indicates over-exposure")
    else:
        exposure = "ok"

    return QcVerdict(
        resolution_ok=resolution_ok,
        laplacian_variance=blur,
        mean_intensity=mean_intensity,
        exposure_status=exposure,
        accepted=not reasons,
        reasons=tuple(reasons),
    )


def validate_image_set(
    images: list[ImageBuffer], policy: QcPolicy = QcPolicy()
) -> tuple[list[QcVerdict], SetVerdict]:
    """Gate each image independently, then gate the set on accepted count."""
    verdicts = [assess_image(img, policy) for img in images]
    n_accepted = sum(v.accepted for v in verdicts)
    reasons: list[str] = []
    if not images:
        reasons.append("no images")
    elif n_accepted < policy.min_images:
        reasons.append(
            f"only {n_accepted} accepted image(s); at least {policy.min_images} required"
        )
    return verdicts, SetVerdict(
        accepted=not reasons, n_accepted=n_accepted, reasons=tuple(reasons)
    )


@dataclass(frozen=True)
class ConfidenceIndicators:
    """Reliability indicators collected along the reconstruction pipeline.

    ``mean_reprojection_error`` is in pixels; it is normalized and
    clamped inside :func:`confidence_score` so the logistic argument is
    dimensionless.
    """

    n_images: int = 0
    inlier_ratio: float = 0.0
    mean_reprojection_error: float = 0.0
    coverage: float = 0.0
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w4: float = 1.0
    score: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.inlier_ratio <= 1.0:
            raise ValidationError("inlier_ratio must lie in [0, 1]")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValidationError("coverage must lie in [0, 1]")

    def with_score(self) -> "ConfidenceIndicators":
        return replace(self, score=confidence_score(self))

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "inlier_ratio": self.inlier_ratio,
            "mean_reprojection_error": self.mean_reprojection_error,
            "coverage": self.coverage,
            "weights": [self.w1, self.w2, self.w3, self.w4],
            "score": self.score,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ConfidenceIndicators":
        w = raw.get("weights", [1.0, 1.0, 1.0, 1.0])
        return cls(
            n_images=raw["n_images"],
            inlier_ratio=raw["inlier_ratio"],
            mean_reprojection_error=raw["mean_reprojection_error"],
            coverage=raw["coverage"],
            w1=w[0],
            w2=w[1],
            w3=w[2],
            w4=w[3],
            score=raw.get("score"),
        )


def confidence_score(ind: ConfidenceIndicators) -> float:
    """Logistic confidence over image count, inlier ratio, reprojection, coverage.

    The image count enters as count/15 clamped to [0, 1] (frame
    extraction caps sets near 15); reprojection error is divided by a
    2 px full scale and clamped before entering as (1 - e).
    """
    for w in (ind.w1, ind.w2, ind.w3, ind.w4):
        if not np.isfinite(w):
            raise ValidationError("confidence weights must be finite")
    n_term = min(ind.n_images / FULL_SCALE_IMAGE_COUNT, 1.0)
    e_term = min(max(ind.mean_reprojection_error / REPROJECTION_NORM_PX, 0.0), 1.0)
    z = (
        ind.w1 * n_term
        + ind.w2 * ind.inlier_ratio
        + ind.w3 * (1.0 - e_term)
        + ind.w4 * ind.coverage
    )
    return float(1.0 / (1.0 + np.exp(-z)))
