"""Synthetic scenes with exact ground truth for evaluation and fixtures.

The evaluation strategy is simulation-based: textured surfaces with
known geometry are rendered through known cameras, giving every stage
of the pipeline an oracle (true poses, true structure, true burn
region, true metric scale).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry.camera import CameraIntrinsics, CameraPose, look_at_pose
from .mesh import LabeledMesh
from .quality import ImageBuffer

# ----------------------------------------------------------------------
# meshes


def icosphere(radius: float = 1.0, subdivisions: int = 3, units: str = "cm") -> LabeledMesh:
    """Subdivided icosahedron projected onto a sphere."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    verts = list(map(tuple, verts))

    for _ in range(subdivisions):
        cache: dict = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.array(verts[i]) + np.array(verts[j])
                m /= np.linalg.norm(m)
                verts.append(tuple(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces

    vertices = np.array(verts) * radius
    return LabeledMesh(vertices=vertices, faces=np.array(faces), units=units)


def planar_grid(
    nx: int = 4,
    ny: int = 4,
    cell: float = 1.0,
    units: str = "cm",
    z: float = 0.0,
) -> LabeledMesh:
    """Flat triangulated grid in the z-plane: nx x ny cells, 2 triangles each."""
    xs = np.arange(nx + 1) * cell
    ys = np.arange(ny + 1) * cell
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])
    faces = []
    for j in range(ny):
        for i in range(nx):
            v00 = j * (nx + 1) + i
            v10 = v00 + 1
            v01 = v00 + (nx + 1)
            v11 = v01 + 1
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    return LabeledMesh(vertices=vertices, faces=np.array(faces), units=units)


def crater_mesh(
    crater_radius: float = 2.0,
    outer_radius: float = 4.0,
    depth: float = 0.5,
    n_rings: int = 40,
    n_theta: int = 72,
    units: str = "cm",
) -> LabeledMesh:
    """Paraboloid crater sunk into a flat disk, with a healthy flat surround.

    Inside ``crater_radius`` the height is z = -depth * (1 - (r/R)^2)
    (apex exactly at -depth); outside it the surface is flat at z = 0.
    Faces fully inside the crater are labeled burned. Face winding gives
    outward (+z) normals.
    """
    verts = [(0.0, 0.0, -depth)]
    for ring in range(1, n_rings + 1):
        r = outer_radius * ring / n_rings
        if r < crater_radius:
            z = -depth * (1.0 - (r / crater_radius) ** 2)
        else:
            z = 0.0
        for t in range(n_theta):
            ang = 2.0 * np.pi * t / n_theta
            verts.append((r * np.cos(ang), r * np.sin(ang), z))
    vertices = np.array(verts)

    faces = []
    for t in range(n_theta):
        faces.append((0, 1 + t, 1 + (t + 1) % n_theta))
    for ring in range(1, n_rings):
        base_in = 1 + (ring - 1) * n_theta
        base_out = 1 + ring * n_theta
        for t in range(n_theta):
            t2 = (t + 1) % n_theta
            a, b = base_in + t, base_in + t2
            c, d = base_out + t, base_out + t2
            faces.append((a, c, d))
            faces.append((a, d, b))
    faces = np.array(faces)

    radii = np.linalg.norm(vertices[:, :2], axis=1)
    face_r = radii[faces].max(axis=1)
    probs = np.where(face_r <= crater_radius + 1e-9, 1.0, 0.0)
    return LabeledMesh(vertices=vertices, faces=faces, face_probability=probs, units=units)


def crater_cavity_volume_voxels(
    crater_radius: float, depth: float, voxel_cm: float = 0.01
) -> float:
    """Brute-force voxel integration of the cavity between surface and plane.

    Counts voxel centers with z_surface(x, y) < z < 0 on a regular
    ``voxel_cm`` grid; independent of the mesh-based volume proxy.
    """
    half = crater_radius
    n_xy = int(np.ceil(2 * half / voxel_cm))
    xs = (np.arange(n_xy) + 0.5) * voxel_cm - half
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    r_sq = gx**2 + gy**2
    inside = r_sq < crater_radius**2
    z_surface = np.where(inside, -depth * (1.0 - r_sq / crater_radius**2), 0.0)

    n_z = int(np.ceil(depth / voxel_cm))
    z_centers = -(np.arange(n_z) + 0.5) * voxel_cm
    count = 0
    for z in z_centers:
        count += int(np.count_nonzero(inside & (z_surface < z)))
    return count * voxel_cm**3


def two_layer_fixture(gap: float = 1.0) -> LabeledMesh:
    """Two stacked parallel square layers; the back layer is fully occluded
    from cameras on the +z side."""
    front = planar_grid(nx=2, ny=2, cell=1.0, z=0.0)
    back = planar_grid(nx=2, ny=2, cell=1.0, z=-gap)
    offset = front.n_vertices
    vertices = np.vstack([front.vertices, back.vertices])
    faces = np.vstack([front.faces, back.faces + offset])
    return LabeledMesh(vertices=vertices, faces=faces, units="cm")


# ----------------------------------------------------------------------
# textured two-plane scene rendered through known cameras


def make_texture(rng: np.random.Generator, size: int = 512, blur: float = 1.2) -> np.ndarray:
    """Band-limited high-contrast random texture in [0, 1].

    A coarse blob layer plus fine blurred noise; rich in the mid-scale
    structure scale-space detectors respond to.
    """
    coarse = rng.random((size // 8, size // 8))
    coarse = ndimage.zoom(coarse, 8, order=1)[:size, :size]
    fine = ndimage.gaussian_filter(rng.random((size, size)), blur)
    tex = 0.55 * coarse + 0.45 * fine
    tex -= tex.min()
    tex /= max(tex.max(), 1e-12)
    return 0.05 + 0.9 * tex


@dataclass
class ScenePlane:
    """Bounded textured rectangle: p0 + u * e1 + v * e2, (u, v) in [0, w] x [0, h]."""

    p0: np.ndarray
    e1: np.ndarray  # unit
    e2: np.ndarray  # unit
    width: float
    height: float
    texture: np.ndarray

    def normal(self) -> np.ndarray:
        n = np.cross(self.e1, self.e2)
        return n / np.linalg.norm(n)

    def world_point(self, u: float, v: float) -> np.ndarray:
        return self.p0 + u * self.e1 + v * self.e2


@dataclass
class SyntheticScene:
    """Two tilted textured planes (a shallow tent) plus known cameras.

    World frame equals camera 0's frame, so a reconstruction re-gauged
    to view 0 matches the ground truth up to scale.
    """

    planes: list
    intrinsics: CameraIntrinsics
    poses: list  # [CameraPose], pose 0 is the identity
    image_size: tuple  # (width, height)
    burn_plane: int = 0
    burn_center_uv: tuple = (0.0, 0.0)
    burn_radius: float = 0.0

    def camera(self, i: int) -> tuple:
        return self.intrinsics, self.poses[i]

    # -- rendering ------------------------------------------------------

    def _plane_hits(self, plane: ScenePlane, origins, directions):
        n = plane.normal()
        denom = directions @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((plane.p0 - origins) @ n) / denom
        pts = origins + t[:, None] * directions
        rel = pts - plane.p0
        u = rel @ plane.e1
        v = rel @ plane.e2
        valid = (
            (np.abs(denom) > 1e-12)
            & (t > 1e-6)
            & (u >= 0)
            & (u <= plane.width)
            & (v >= 0)
            & (v <= plane.height)
        )
        return t, u, v, valid

    def _sample(self, plane: ScenePlane, u, v):
        tex = plane.texture
        th, tw = tex.shape
        px = np.clip(u / plane.width * (tw - 1), 0, tw - 1)
        py = np.clip(v / plane.height * (th - 1), 0, th - 1)
        x0 = np.floor(px).astype(int)
        y0 = np.floor(py).astype(int)
        x1 = np.minimum(x0 + 1, tw - 1)
        y1 = np.minimum(y0 + 1, th - 1)
        fx = px - x0
        fy = py - y0
        top = tex[y0, x0] * (1 - fx) + tex[y0, x1] * fx
        bot = tex[y1, x0] * (1 - fx) + tex[y1, x1] * fx
        return top * (1 - fy) + bot * fy

    def _render_field(self, view: int, plane_values) -> np.ndarray:
        """Raycast every pixel; plane_values(plane_idx, u, v) gives the shade."""
        w, h = self.image_size
        K = self.intrinsics
        pose = self.poses[view]
        us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        ones = np.ones_like(us)
        pix = np.stack([us.ravel(), vs.ravel(), ones.ravel()])
        dirs_cam = K.inverse_matrix() @ pix
        dirs = (pose.rotation.T @ dirs_cam).T
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        origins = np.broadcast_to(pose.center(), dirs.shape)

        shade = np.full(w * h, 0.5)
        best_t = np.full(w * h, np.inf)
        for pi, plane in enumerate(self.planes):
            t, u, v, valid = self._plane_hits(plane, origins, dirs)
            closer = valid & (t < best_t)
            if closer.any():
                shade[closer] = plane_values(pi, u[closer], v[closer])
                best_t[closer] = t[closer]
        return shade.reshape(h, w)

    def render_view(self, view: int) -> ImageBuffer:
        field = self._render_field(
            view, lambda pi, u, v: self._sample(self.planes[pi], u, v)
        )
        return ImageBuffer(np.round(np.clip(field, 0, 1) * 255).astype(np.uint8))

    def render_mask(self, view: int) -> np.ndarray:
        """Burn indicator in [0, 1] per pixel, raycast like the texture."""

        def values(pi, u, v):
            if pi != self.burn_plane or self.burn_radius <= 0:
                return np.zeros_like(u)
            du = u - self.burn_center_uv[0]
            dv = v - self.burn_center_uv[1]
            return (du * du + dv * dv <= self.burn_radius**2).astype(np.float64)

        return self._render_field(view, values)

    # -- ground truth ----------------------------------------------------

    def ground_truth_mesh(self, cells_u: int = 24, cells_v: int = 24) -> LabeledMesh:
        """Triangulated planes with burn labels from the texture-space disk."""
        all_verts = []
        all_faces = []
        probs = []
        offset = 0
        for pi, plane in enumerate(self.planes):
            us = np.linspace(0, plane.width, cells_u + 1)
            vs = np.linspace(0, plane.height, cells_v + 1)
            gu, gv = np.meshgrid(us, vs, indexing="xy")
            pts = (
                plane.p0[None, :]
                + gu.ravel()[:, None] * plane.e1[None, :]
                + gv.ravel()[:, None] * plane.e2[None, :]
            )
            all_verts.append(pts)
            for j in range(cells_v):
                for i in range(cells_u):
                    v00 = offset + j * (cells_u + 1) + i
                    v10 = v00 + 1
                    v01 = v00 + (cells_u + 1)
                    v11 = v01 + 1
                    for tri in ((v00, v10, v11), (v00, v11, v01)):
                        all_faces.append(tri)
                        if pi == self.burn_plane and self.burn_radius > 0:
                            iu = (us[i] + us[i + 1]) / 2
                            iv = (vs[j] + vs[j + 1]) / 2
                            du = iu - self.burn_center_uv[0]
                            dv = iv - self.burn_center_uv[1]
                            inside = du * du + dv * dv <= self.burn_radius**2
                            probs.append(1.0 if inside else 0.0)
                        else:
                            probs.append(0.0)
            offset += len(pts)
        return LabeledMesh(
            vertices=np.vstack(all_verts),
            faces=np.array(all_faces),
            face_probability=np.array(probs),
            units="cm",
        )

    def scale_reference(self) -> tuple:
        """Two world points a known distance apart (corners of plane 0)."""
        plane = self.planes[0]
        margin_u = plane.width * 0.2
        margin_v = plane.height * 0.2
        p1 = plane.world_point(margin_u, margin_v)
        p2 = plane.world_point(plane.width - margin_u, margin_v)
        return p1, p2, float(np.linalg.norm(p2 - p1))


ARCH_PROFILE = ((-7.0, -4.5), (-3.5, -1.2), (0.0, 0.0), (3.5, -1.2), (7.0, -4.5))


def build_tent_scene(
    rng: np.random.Generator,
    n_views: int = 8,
    image_size: tuple = (480, 360),
    focal: float = 520.0,
    profile: tuple = ARCH_PROFILE,
    height: float = 10.0,
    camera_distance: float = 18.0,
    arc_half_angle: float = 0.55,
    burn_radius: float = 2.2,
    texture_size: int = 448,
) -> SyntheticScene:
    """Faceted textured arch viewed from an arc of cameras, units cm.

    ``profile`` lists (x, z) breakpoints of the cross-section; each
    segment extrudes along y into a textured planar facet. At least
    three facets in general position keep two-view geometry well-posed:
    one or two planes form a critical surface for the linear
    essential-matrix system. World coordinates equal camera 0's frame.
    """
    w, h = image_size
    K = CameraIntrinsics(fx=focal, fy=focal, cx=(w - 1) / 2.0, cy=(h - 1) / 2.0)

    e_up = np.array([0.0, 1.0, 0.0])
    y0 = -height / 2.0
    planes = []
    for (x_a, z_a), (x_b, z_b) in zip(profile[:-1], profile[1:]):
        direction = np.array([x_b - x_a, 0.0, z_b - z_a])
        length = np.linalg.norm(direction)
        planes.append(
            ScenePlane(
                p0=np.array([x_a, y0, z_a]),
                e1=direction / length,
                e2=e_up,
                width=length,
                height=height,
                texture=make_texture(rng, texture_size),
            )
        )

    z_values = [z for _, z in profile]
    target = np.array([0.0, 0.0, (max(z_values) + min(z_values)) / 2.0])
    poses = []
    angles = np.linspace(-arc_half_angle, arc_half_angle, n_views)
    for i, ang in enumerate(angles):
        center = np.array(
            [
                camera_distance * np.sin(ang),
                3.0 * np.sin(2.1 * ang + 0.3),
                camera_distance * np.cos(ang),
            ]
        )
        poses.append(look_at_pose(center, target))

    # re-express everything in camera 0's frame (world == camera 0)
    r0 = poses[0].rotation
    t0 = poses[0].translation

    def to_cam0(points: np.ndarray) -> np.ndarray:
        return points @ r0.T + t0

    for plane in planes:
        plane.p0 = to_cam0(plane.p0[None, :])[0]
        plane.e1 = r0 @ plane.e1
        plane.e2 = r0 @ plane.e2
    new_poses = []
    for pose in poses:
        # X_cam_i = R_i X_world + t_i and X_world = r0^T (X_cam0 - t0)
        rotation = pose.rotation @ r0.T
        translation = pose.translation - rotation @ t0
        new_poses.append(CameraPose(rotation, translation))

    burn_plane = min(1, len(planes) - 1)
    burn_center = (planes[burn_plane].width * 0.5, height * 0.55)
    return SyntheticScene(
        planes=planes,
        intrinsics=K,
        poses=new_poses,
        image_size=image_size,
        burn_plane=burn_plane,
        burn_center_uv=burn_center,
        burn_radius=burn_radius,
    )
