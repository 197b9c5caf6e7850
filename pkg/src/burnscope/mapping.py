"""Burn masks, mask scoring, and painting burn probability onto the mesh.

Per-view masks are projected onto the reconstructed surface by casting
the ray through each face centroid's pixel and checking that the
nearest hit is the face itself (occlusion respected), then fusing the
sampled per-view probabilities with a complement product.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from PIL import Image

from .errors import EmptyVisibilityError, ShapeError, ValidationError
from .geometry.camera import CameraIntrinsics, CameraPose, Ray, cast_pixel_ray, project_points
from .mesh import LabeledMesh

BCE_CLAMP = 1e-7


@dataclass(frozen=True)
class BurnMask:
    """Per-pixel burn probability aligned with one camera view."""

    probabilities: np.ndarray  # (height, width) float64 in [0, 1]

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=np.float64)
        if p.ndim != 2 or p.size == 0:
            raise ValidationError("mask must be a non-empty 2-D grid")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValidationError("mask probabilities must lie in [0, 1]")
        object.__setattr__(self, "probabilities", p)

    @property
    def height(self) -> int:
        return self.probabilities.shape[0]

    @property
    def width(self) -> int:
        return self.probabilities.shape[1]

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "BurnMask":
        """8-bit grayscale PNG: 0 = background, 255 = burn, between = probability."""
        with Image.open(io.BytesIO(data)) as img:
            gray = np.asarray(img.convert("L"), dtype=np.float64)
        return cls(gray / 255.0)

    def to_png_bytes(self) -> bytes:
        data = np.round(self.probabilities * 255.0).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(data, mode="L").save(buf, format="PNG")
        return buf.getvalue()

    def sample_bilinear(self, u: float, v: float) -> Optional[float]:
        """Probability at continuous pixel coordinates; None outside the image."""
        if not (0.0 <= u <= self.width - 1 and 0.0 <= v <= self.height - 1):
            return None
        x0 = int(math.floor(u))
        y0 = int(math.floor(v))
        x1 = min(x0 + 1, self.width - 1)
        y1 = min(y0 + 1, self.height - 1)
        fx = u - x0
        fy = v - y0
        p = self.probabilities
        top = p[y0, x0] * (1 - fx) + p[y0, x1] * fx
        bottom = p[y1, x0] * (1 - fx) + p[y1, x1] * fx
        return float(top * (1 - fy) + bottom * fy)


@dataclass(frozen=True)
class MaskEvaluation:
    dice_loss: float
    bce_loss: float
    combined_loss: float
    dice_score: float


def evaluate_mask(
    pred: BurnMask, gt: BurnMask, alpha: float = 0.5, epsilon: float = 1e-6
) -> MaskEvaluation:
    """Dice loss, per-pixel BCE, and their alpha-weighted combination."""
    if pred.probabilities.shape != gt.probabilities.shape:
        raise ShapeError(
            f"mask shapes differ: {pred.probabilities.shape} vs {gt.probabilities.shape}"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("alpha must lie in [0, 1]")
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")

    p = pred.probabilities
    g = gt.probabilities
    dice_loss = 1.0 - 2.0 * np.sum(g * p) / (np.sum(g) + np.sum(p) + epsilon)
    clamped = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    bce = -np.mean(g * np.log(clamped) + (1.0 - g) * np.log(1.0 - clamped))
    combined = alpha * dice_loss + (1.0 - alpha) * bce
    return MaskEvaluation(
        dice_loss=float(dice_loss),
        bce_loss=float(bce),
        combined_loss=float(combined),
        dice_score=float(1.0 - dice_loss),
    )


@dataclass(frozen=True)
class RayHit:
    face_index: int
    point: np.ndarray
    t: float


_PARALLEL_EPS = 1e-12
_EDGE_EPS = 1e-12
_T_TIE_EPS = 1e-9


def intersect_ray_mesh(ray: Ray, mesh: LabeledMesh) -> Optional[RayHit]:
    """Nearest positive intersection of a ray with the mesh triangles.

    Edge and vertex hits count for every adjacent face; ties on the ray
    parameter are resolved to the lowest face index so shared-edge hits
    are attributed deterministically. Absence of a hit is a value.
    """
    if mesh.n_faces == 0:
        raise ValidationError("mesh has no faces")
    tri = mesh.vertices[mesh.faces]

    # axis-aligned bounding-box prefilter per face (slab test)
    lo = tri.min(axis=1)
    hi = tri.max(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_d = 1.0 / ray.direction
        t_lo = (lo - ray.origin) * inv_d
        t_hi = (hi - ray.origin) * inv_d
    t_near = np.nanmax(np.minimum(t_lo, t_hi), axis=1)
    t_far = np.nanmin(np.maximum(t_lo, t_hi), axis=1)
    candidates = np.flatnonzero(t_far >= np.maximum(t_near, 0.0) - 1e-12)
    if candidates.size == 0:
        return None

    v0 = tri[candidates, 0]
    e1 = tri[candidates, 1] - v0
    e2 = tri[candidates, 2] - v0
    pvec = np.cross(ray.direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    valid = np.abs(det) > _PARALLEL_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_det = np.where(valid, 1.0 / det, 0.0)
    tvec = ray.origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = np.einsum("ij,j->i", qvec, ray.direction) * inv_det
    t = np.einsum("ij,ij->i", e2, qvec) * inv_det
    hits = (
        valid
        & (u >= -_EDGE_EPS)
        & (v >= -_EDGE_EPS)
        & (u + v <= 1.0 + _EDGE_EPS)
        & (t > _PARALLEL_EPS)
    )
    if not hits.any():
        return None
    hit_idx = np.flatnonzero(hits)
    t_hits = t[hit_idx]
    t_min = t_hits.min()
    tied = hit_idx[t_hits <= t_min + _T_TIE_EPS * max(1.0, abs(t_min))]
    face = int(candidates[tied].min())  # lowest-index face wins ties
    sel = int(tied[np.argmin(candidates[tied])])
    t_face = float(t[sel])
    return RayHit(face_index=face, point=ray.at(t_face), t=t_face)


def fuse_view_probabilities(probabilities) -> float:
    """Complement-product fusion: P = 1 - prod(1 - p_j); empty input gives 0."""
    total = 1.0
    for p in probabilities:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"view probability {p!r} outside [0, 1]")
        total *= 1.0 - p
    return 1.0 - total


@dataclass(frozen=True)
class PaintView:
    """Camera plus its burn mask, everything in the mesh's frame."""

    intrinsics: CameraIntrinsics
    pose: CameraPose
    mask: BurnMask


@dataclass(frozen=True)
class FusionParams:
    mode: str = "fusion"  # "fusion" | "any_hit"
    label_threshold: float = 0.5
    min_views_for_coverage: int = 2


@dataclass
class PaintResult:
    mesh: LabeledMesh
    coverage: float  # fraction of burn-labeled faces seen by >= k views
    per_face_views: list  # per face: list of (view index, sampled probability)


def paint_mesh(
    mesh: LabeledMesh, views: list, params: FusionParams = FusionParams()
) -> PaintResult:
    """Fuse per-view mask probabilities onto faces, occlusion-aware.

    A view contributes to a face when the ray through the face
    centroid's projected pixel hits that face first. Painting the same
    inputs twice reproduces identical probabilities.
    """
    if mesh.n_faces == 0:
        raise ValidationError("cannot paint an empty mesh")
    centroids = mesh.face_centroids()
    per_face: list[list] = [[] for _ in range(mesh.n_faces)]

    for view_index, view in enumerate(views):
        pixels, depths = project_points(view.intrinsics, view.pose, centroids)
        for face_index in range(mesh.n_faces):
            if depths[face_index] <= 1e-9 or not np.isfinite(pixels[face_index]).all():
                continue
            u, v = pixels[face_index]
            if not (0.0 <= u <= view.mask.width - 1 and 0.0 <= v <= view.mask.height - 1):
                continue
            ray = cast_pixel_ray(view.intrinsics, view.pose, (u, v))
            hit = intersect_ray_mesh(ray, mesh)
            if hit is None or hit.face_index != face_index:
                continue
            sample = view.mask.sample_bilinear(u, v)
            if sample is None:
                continue
            per_face[face_index].append((view_index, sample))

    visibility = np.array([len(v) for v in per_face], dtype=np.int64)
    if visibility.sum() == 0:
        raise EmptyVisibilityError("no face is visible from any view")

    probabilities = np.zeros(mesh.n_faces)
    for face_index, samples in enumerate(per_face):
        ps = [p for _, p in samples]
        if params.mode == "any_hit":
            probabilities[face_index] = (
                1.0 if any(p >= params.label_threshold for p in ps) else 0.0
            )
        else:
            probabilities[face_index] = fuse_view_probabilities(ps)

    painted = LabeledMesh(
        vertices=mesh.vertices.copy(),
        faces=mesh.faces.copy(),
        face_probability=probabilities,
        visibility_count=visibility,
        units=mesh.units,
        label_threshold=params.label_threshold,
    )
    burned = painted.burn_faces()
    if burned.any():
        covered = visibility[burned] >= params.min_views_for_coverage
        coverage = float(np.mean(covered))
    else:
        coverage = 1.0  # vacuously covered: nothing labeled burned
    return PaintResult(mesh=painted, coverage=coverage, per_face_views=per_face)
