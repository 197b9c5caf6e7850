"""Triangle mesh with per-face burn probability and ASCII PLY round-trip."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import TopologyError, ValidationError

DEFAULT_LABEL_THRESHOLD = 0.5


@dataclass
class LabeledMesh:
    """Triangular surface whose faces carry a burn probability in [0, 1].

    Vertices are in cm once ``units == "cm"``; reconstruction output
    starts in arbitrary units until metric scaling is applied.
    """

    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray  # (m, 3) int64
    face_probability: Optional[np.ndarray] = None  # (m,) float64 in [0, 1]
    visibility_count: Optional[np.ndarray] = None  # (m,) int64
    units: str = "arbitrary"  # "arbitrary" | "cm"
    label_threshold: float = DEFAULT_LABEL_THRESHOLD

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size and (
            self.faces.min() < 0 or self.faces.max() >= len(self.vertices)
        ):
            raise ValidationError("face indices reference missing vertices")
        if self.face_probability is None:
            self.face_probability = np.zeros(len(self.faces), dtype=np.float64)
        else:
            self.face_probability = np.asarray(self.face_probability, dtype=np.float64)
            if self.face_probability.shape != (len(self.faces),):
                raise ValidationError("face_probability length must match face count")
            if self.face_probability.size and (
                self.face_probability.min() < 0 or self.face_probability.max() > 1
            ):
                raise ValidationError("face probabilities must lie in [0, 1]")
        if self.visibility_count is None:
            self.visibility_count = np.zeros(len(self.faces), dtype=np.int64)
        else:
            self.visibility_count = np.asarray(self.visibility_count, dtype=np.int64)

    # ------------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def burn_faces(self) -> np.ndarray:
        """Boolean mask of faces labeled burned (probability >= threshold)."""
        return self.face_probability >= self.label_threshold

    def burn_vertex_indices(self) -> np.ndarray:
        """Indices of vertices belonging to at least one burned face."""
        burned = self.faces[self.burn_faces()]
        return np.unique(burned) if burned.size else np.empty(0, dtype=np.int64)

    def face_centroids(self) -> np.ndarray:
        return self.vertices[self.faces].mean(axis=1)

    def face_normals(self) -> np.ndarray:
        """Unit normals per face (right-hand rule; degenerate faces get zeros)."""
        tri = self.vertices[self.faces]
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norms = np.linalg.norm(n, axis=1)
        ok = norms > 0
        n[ok] /= norms[ok, None]
        return n

    def edge_face_map(self) -> dict:
        """Map (min_vertex, max_vertex) -> sorted list of incident face indices."""
        edges: dict[tuple[int, int], list[int]] = {}
        for fi, (a, b, c) in enumerate(self.faces):
            for u, v in ((a, b), (b, c), (c, a)):
                key = (int(min(u, v)), int(max(u, v)))
                edges.setdefault(key, []).append(fi)
        return edges

    def check_manifold_edges(self) -> None:
        """Raise if any edge is shared by more than two faces."""
        for edge, incident in self.edge_face_map().items():
            if len(incident) > 2:
                raise TopologyError(
                    f"edge {edge} shared by {len(incident)} faces; non-manifold mesh"
                )

    def vertex_adjacency(self) -> list:
        """Per-vertex sorted list of neighbouring vertex indices."""
        neigh: list[set] = [set() for _ in range(self.n_vertices)]
        for a, b, c in self.faces:
            neigh[a].update((b, c))
            neigh[b].update((a, c))
            neigh[c].update((a, b))
        return [sorted(s) for s in neigh]

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "LabeledMesh":
        """Rigidly transformed copy: v -> R v + t."""
        rotation = np.asarray(rotation, dtype=np.float64)
        translation = np.asarray(translation, dtype=np.float64)
        return LabeledMesh(
            vertices=self.vertices @ rotation.T + translation,
            faces=self.faces.copy(),
            face_probability=self.face_probability.copy(),
            visibility_count=self.visibility_count.copy(),
            units=self.units,
            label_threshold=self.label_threshold,
        )

    # ------------------------------------------------------------------
    # ASCII PLY with a per-face probability property

    def to_ply(self, vertex_depth_mm: Optional[np.ndarray] = None) -> str:
        lines = [
            "ply",
            "format ascii 1.0",
            f"comment units {self.units}",
            f"element vertex {self.n_vertices}",
            "property double x",
            "property double y",
            "property double z",
        ]
        if vertex_depth_mm is not None:
            vertex_depth_mm = np.asarray(vertex_depth_mm, dtype=np.float64)
            if vertex_depth_mm.shape != (self.n_vertices,):
                raise ValidationError("depth field length must match vertex count")
            lines.append("property double depth_mm")
        lines += [
            f"element face {self.n_faces}",
            "property list uchar int vertex_indices",
            "property double burn_probability",
            "property int visibility",
            "end_header",
        ]
        for i, v in enumerate(self.vertices):
            row = f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}"
            if vertex_depth_mm is not None:
                row += f" {float(vertex_depth_mm[i])!r}"
            lines.append(row)
        for f, p, c in zip(self.faces, self.face_probability, self.visibility_count):
            lines.append(f"3 {f[0]} {f[1]} {f[2]} {float(p)!r} {int(c)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ply(cls, text: str) -> "LabeledMesh":
        lines = text.splitlines()
        it = iter(lines)
        if next(it, "").strip() != "ply":
            raise ValidationError("not a PLY document")
        n_vert = n_face = 0
        units = "arbitrary"
        vertex_props: list[str] = []
        face_props: list[str] = []
        current = None
        for line in it:
            token = line.strip()
            if token == "end_header":
                break
            parts = token.split()
            if not parts:
                continue
            if parts[0] == "comment" and len(parts) >= 3 and parts[1] == "units":
                units = parts[2]
            elif parts[0] == "element":
                current = parts[1]
                if current == "vertex":
                    n_vert = int(parts[2])
                elif current == "face":
                    n_face = int(parts[2])
            elif parts[0] == "property":
                if current == "vertex" and parts[1] != "list":
                    vertex_props.append(parts[-1])
                elif current == "face":
                    face_props.append(parts[-1])
        else:
            raise ValidationError("PLY header missing end_header")

        verts = np.zeros((n_vert, 3), dtype=np.float64)
        for i in range(n_vert):
            vals = next(it).split()
            verts[i] = [float(vals[0]), float(vals[1]), float(vals[2])]
        faces = np.zeros((n_face, 3), dtype=np.int64)
        probs = np.zeros(n_face, dtype=np.float64)
        vis = np.zeros(n_face, dtype=np.int64)
        has_prob = "burn_probability" in face_props
        has_vis = "visibility" in face_props
        for i in range(n_face):
            vals = next(it).split()
            count = int(vals[0])
            if count != 3:
                raise ValidationError("only triangular faces are supported")
            faces[i] = [int(vals[1]), int(vals[2]), int(vals[3])]
            cursor = 4
            if has_prob:
                probs[i] = float(vals[cursor])
                cursor += 1
            if has_vis:
                vis[i] = int(vals[cursor])
        return cls(
            vertices=verts,
            faces=faces,
            face_probability=probs,
            visibility_count=vis,
            units=units,
        )

    def to_ply_bytes(self) -> bytes:
        return self.to_ply().encode("utf-8")

    @classmethod
    def from_ply_bytes(cls, data: bytes) -> "LabeledMesh":
        return cls.from_ply(data.decode("utf-8"))
