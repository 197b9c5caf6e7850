"""Wound metrics on a labeled mesh: area, perimeter, depth proxy, volume proxy.

Depth is a geometry-derived proxy: signed displacement of the wound
surface relative to a reference surface fitted to the surrounding
healthy ring. The sign convention makes depth into the wound positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateFitError,
    EmptyRegionError,
    TopologyError,
    UnscaledGeometryError,
)
from .mesh import LabeledMesh
from .models import BurnMetrics, Clock, utc_now

MM_PER_CM = 10.0


def triangle_area(v1, v2, v3) -> float:
    """Half the cross-product magnitude; degenerate triangles give 0."""
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    v3 = np.asarray(v3, dtype=np.float64)
    return 0.5 * float(np.linalg.norm(np.cross(v2 - v1, v3 - v1)))


def face_areas(mesh: LabeledMesh) -> np.ndarray:
    tri = mesh.vertices[mesh.faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1)


def burn_surface_area(mesh: LabeledMesh) -> float:
    """Sum of face areas over burn-labeled faces."""
    burned = mesh.burn_faces()
    if not burned.any():
        return 0.0
    return float(face_areas(mesh)[burned].sum())


def boundary_edges(mesh: LabeledMesh) -> list:
    """Edges with exactly one burned incident face.

    An open-mesh rim edge of a burned face has one incident face and
    counts: it separates wound from the (absent) surround, and dropping
    it would under-report open-boundary wounds.
    """
    burned = mesh.burn_faces()
    out = []
    for edge, incident in mesh.edge_face_map().items():
        if len(incident) > 2:
            raise TopologyError(
                f"edge {edge} shared by {len(incident)} faces; non-manifold mesh"
            )
        n_burned = sum(bool(burned[f]) for f in incident)
        if n_burned == 1 and (len(incident) == 1 or not burned[incident[0]] or not burned[incident[1]]):
            out.append(edge)
    return out


def burn_perimeter(mesh: LabeledMesh) -> float:
    """Total length of edges separating burned from non-burned surface."""
    edges = boundary_edges(mesh)
    if not edges:
        return 0.0
    idx = np.array(edges, dtype=np.int64)
    seg = mesh.vertices[idx[:, 0]] - mesh.vertices[idx[:, 1]]
    return float(np.linalg.norm(seg, axis=1).sum())


@dataclass
class ReferenceSurface:
    """Reference fitted to the healthy ring; normal points outward (away from body)."""

    normal: np.ndarray  # unit, outward
    p0: np.ndarray
    residual_rms: float
    method: str  # "plane" | "quadratic"
    e1: Optional[np.ndarray] = None  # in-plane frame, set for quadratic fits
    e2: Optional[np.ndarray] = None
    coefficients: Optional[np.ndarray] = None  # (6,) for h = c0 a^2 + c1 ab + c2 b^2 + c3 a + c4 b + c5

    def signed_depth(self, points: np.ndarray) -> np.ndarray:
        """Depth into the wound (below the reference surface) is positive, in cm."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        rel = points - self.p0
        h = rel @ self.normal
        if self.method == "plane":
            return -h
        a = rel @ self.e1
        b = rel @ self.e2
        c = self.coefficients
        h_surface = c[0] * a * a + c[1] * a * b + c[2] * b * b + c[3] * a + c[4] * b + c[5]
        return h_surface - h


def _plane_tls(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Total-least-squares plane: (unit normal, centroid, signed residuals)."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if len(s) < 3 or s[1] <= 1e-12 * max(s[0], 1.0):
        raise DegenerateFitError("plane fit needs >= 3 non-collinear vertices")
    normal = vt[2]
    return normal, centroid, centered @ normal


def _mad_keep(residuals: np.ndarray, min_points: int) -> np.ndarray:
    med = np.median(residuals)
    mad = np.median(np.abs(residuals - med))
    keep = np.abs(residuals - med) <= 2.5 * mad + 1e-300
    if keep.sum() < min_points:
        return np.ones(len(residuals), dtype=bool)
    return keep


def _robust_plane(points: np.ndarray, min_points: int) -> tuple:
    """TLS plane with a MAD-trimmed re-fit, guarded against outlier hijack.

    A gross outlier can rotate the plain TLS direction toward itself, so
    the trim is also seeded from the three coordinate-plane directions
    (residuals about the median point); the candidate whose final plane
    has the smallest median absolute residual over all points wins.
    """
    seeds = []
    try:
        normal, centroid, residuals = _plane_tls(points)
        seeds.append((residuals,))
    except DegenerateFitError:
        raise
    median_point = np.median(points, axis=0)
    for axis in range(3):
        seeds.append(((points - median_point)[:, axis],))

    best = None
    for (residuals,) in seeds:
        keep = _mad_keep(residuals, min_points)
        try:
            normal, centroid, kept_res = _plane_tls(points[keep])
        except DegenerateFitError:
            continue
        all_res = np.abs((points - centroid) @ normal)
        score = float(np.median(all_res))
        if best is None or score < best[0] - 1e-15:
            best = (score, normal, centroid, keep, kept_res)
    if best is None:
        raise DegenerateFitError("plane fit needs >= 3 non-collinear vertices")
    _, normal, centroid, keep, kept_res = best
    return normal, centroid, keep, kept_res


def fit_reference_surface(
    ring_vertices,
    method: str = "plane",
    outward_hint: Optional[np.ndarray] = None,
    trim: bool = True,
) -> ReferenceSurface:
    """Fit a plane (or local quadratic) to the healthy ring around a wound.

    The plane is the total-least-squares fit; with ``trim`` a re-fit
    discards points whose residual deviates from the median by more
    than 2.5x the median absolute deviation. ``outward_hint`` orients
    the normal toward the outside of the body.
    """
    points = np.asarray(ring_vertices, dtype=np.float64).reshape(-1, 3)
    min_points = 3 if method == "plane" else 6
    if len(points) < min_points:
        raise DegenerateFitError(
            f"{method} fit needs >= {min_points} vertices, got {len(points)}"
        )

    if trim and len(points) > min_points:
        normal, centroid, keep, residuals = _robust_plane(points, min_points)
        points = points[keep]
    else:
        normal, centroid, residuals = _plane_tls(points)

    if outward_hint is not None:
        hint = np.asarray(outward_hint, dtype=np.float64)
        if float(hint @ normal) < 0:
            normal = -normal
    elif normal[np.argmax(np.abs(normal))] < 0:
        normal = -normal  # deterministic sign when no hint is available

    if method == "plane":
        rms = float(np.sqrt(np.mean(residuals**2)))
        return ReferenceSurface(normal=normal, p0=centroid, residual_rms=rms, method="plane")

    if method != "quadratic":
        raise ValueError(f"unknown fit method {method!r}")

    # local frame: e1, e2 span the fitted plane
    seed = np.array([1.0, 0.0, 0.0])
    if abs(seed @ normal) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(normal, seed)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)

    rel = points - centroid
    a = rel @ e1
    b = rel @ e2
    h = rel @ normal
    design = np.column_stack([a * a, a * b, b * b, a, b, np.ones_like(a)])
    coeffs, *_ = np.linalg.lstsq(design, h, rcond=None)
    fit_res = design @ coeffs - h
    return ReferenceSurface(
        normal=normal,
        p0=centroid,
        residual_rms=float(np.sqrt(np.mean(fit_res**2))),
        method="quadratic",
        e1=e1,
        e2=e2,
        coefficients=coeffs,
    )


def burn_boundary_vertices(mesh: LabeledMesh) -> np.ndarray:
    """Vertices on edges that separate burned from non-burned surface."""
    edges = boundary_edges(mesh)
    if not edges:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.array(edges, dtype=np.int64).ravel())


def healthy_ring_vertices(mesh: LabeledMesh, hops: int = 2) -> np.ndarray:
    """Non-burned vertices within ``hops`` topological hops of the burn boundary."""
    burn_vertices = set(mesh.burn_vertex_indices().tolist())
    frontier = set(burn_boundary_vertices(mesh).tolist())
    if not frontier:
        return np.empty(0, dtype=np.int64)
    adjacency = mesh.vertex_adjacency()
    ring: set[int] = set()
    visited = set(frontier)
    for _ in range(hops):
        next_frontier: set[int] = set()
        for v in frontier:
            for nb in adjacency[v]:
                if nb in visited:
                    continue
                visited.add(nb)
                if nb not in burn_vertices:
                    ring.add(nb)
                    next_frontier.add(nb)
        frontier = next_frontier
        if not frontier:
            break
    return np.array(sorted(ring), dtype=np.int64)


def ring_outward_hint(mesh: LabeledMesh, ring: np.ndarray) -> Optional[np.ndarray]:
    """Area-weighted mean normal of healthy faces touching the ring."""
    burned = mesh.burn_faces()
    ring_set = set(ring.tolist())
    normals = mesh.face_normals()
    areas = face_areas(mesh)
    total = np.zeros(3)
    for fi, face in enumerate(mesh.faces):
        if burned[fi]:
            continue
        if any(int(v) in ring_set for v in face):
            total += normals[fi] * areas[fi]
    if np.linalg.norm(total) < 1e-12:
        healthy = ~burned
        if healthy.any():
            total = (normals[healthy] * areas[healthy, None]).sum(axis=0)
    norm = np.linalg.norm(total)
    return total / norm if norm > 1e-12 else None


def fit_reference_for_region(
    mesh: LabeledMesh, hops: int = 2, method: str = "plane"
) -> ReferenceSurface:
    """Fit the reference surface to the wound's healthy ring, outward-oriented."""
    ring = healthy_ring_vertices(mesh, hops=hops)
    if len(ring) < 3:
        raise DegenerateFitError(
            f"healthy ring has only {len(ring)} vertices; widen hops or check labels"
        )
    hint = ring_outward_hint(mesh, ring)
    return fit_reference_surface(mesh.vertices[ring], method=method, outward_hint=hint)


@dataclass
class DepthField:
    """Signed depths over the burn vertices, positive into the wound."""

    vertex_indices: np.ndarray  # burn vertices
    depths_mm: np.ndarray  # aligned with vertex_indices
    d_max_mm: float
    d_avg_mm: float
    reference: ReferenceSurface

    def full_vertex_array(self, n_vertices: int) -> np.ndarray:
        """Depth per mesh vertex in mm, zero outside the burn region."""
        out = np.zeros(n_vertices, dtype=np.float64)
        out[self.vertex_indices] = self.depths_mm
        return out


def signed_depths(
    mesh: LabeledMesh,
    ref: Optional[ReferenceSurface] = None,
    hops: int = 2,
    fit_method: str = "plane",
) -> DepthField:
    """Per-vertex signed depth over the burn region, plus max and mean (mm)."""
    burn_vertices = mesh.burn_vertex_indices()
    if burn_vertices.size == 0:
        raise EmptyRegionError("mesh has no burn-labeled faces")
    if ref is None:
        ref = fit_reference_for_region(mesh, hops=hops, method=fit_method)
    depths_cm = ref.signed_depth(mesh.vertices[burn_vertices])
    depths_mm = depths_cm * MM_PER_CM
    return DepthField(
        vertex_indices=burn_vertices,
        depths_mm=depths_mm,
        d_max_mm=float(depths_mm.max()),
        d_avg_mm=float(depths_mm.mean()),
        reference=ref,
    )


def volume_proxy(mesh: LabeledMesh, depth_field: DepthField) -> float:
    """Sum over burned faces of face area x mean vertex depth (cm^3).

    Faces whose mean depth is negative (tissue proud of the reference)
    contribute zero: the proxy measures the wound cavity.
    """
    burned = np.flatnonzero(mesh.burn_faces())
    if burned.size == 0:
        return 0.0
    depth_cm = np.zeros(mesh.n_vertices)
    depth_cm[depth_field.vertex_indices] = depth_field.depths_mm / MM_PER_CM
    areas = face_areas(mesh)
    face_depth = depth_cm[mesh.faces[burned]].mean(axis=1)
    return float((areas[burned] * np.clip(face_depth, 0.0, None)).sum())


def compute_burn_metrics(
    mesh: LabeledMesh,
    body_surface_area_cm2: Optional[float] = None,
    ref: Optional[ReferenceSurface] = None,
    hops: int = 2,
    fit_method: str = "plane",
    clock: Clock = utc_now,
) -> BurnMetrics:
    """Aggregate area, perimeter, depth statistics, volume proxy, and TBSA."""
    if mesh.units != "cm":
        raise UnscaledGeometryError(
            f"mesh units are {mesh.units!r}; apply metric scaling before computing metrics"
        )
    area = burn_surface_area(mesh)
    if mesh.burn_faces().any():
        perimeter = burn_perimeter(mesh)
        depth_field = signed_depths(mesh, ref=ref, hops=hops, fit_method=fit_method)
        d_max = depth_field.d_max_mm
        d_avg = depth_field.d_avg_mm
        volume = volume_proxy(mesh, depth_field)
    else:
        perimeter = d_max = d_avg = volume = 0.0
    tbsa = None
    if body_surface_area_cm2 is not None:
        tbsa = 100.0 * area / body_surface_area_cm2
    return BurnMetrics(
        area_cm2=area,
        perimeter_cm=perimeter,
        d_max_mm=d_max,
        d_avg_mm=d_avg,
        volume_proxy_cm3=volume,
        tbsa_percent=tbsa,
        computed_at=clock(),
    )
