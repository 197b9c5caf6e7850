"""Sparse reconstruction output: 3D points with their image observations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError


@dataclass
class SparseCloud:
    """Points plus per-point observation lists (view index, pixel coordinates)."""

    points: np.ndarray  # (n, 3)
    observations: list  # per point: list of (view_id, (u, v))
    units: str = "arbitrary"  # "arbitrary" | "cm"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if len(self.observations) != len(self.points):
            raise ValidationError("observation list length must match point count")

    def validate(self, view_ids) -> None:
        """Every observation references a known view; every point has >= 2 views."""
        known = set(view_ids)
        for i, obs in enumerate(self.observations):
            if len(obs) < 2:
                raise ValidationError(f"point {i} observed by fewer than 2 views")
            for view, _ in obs:
                if view not in known:
                    raise ValidationError(f"point {i} references unknown view {view!r}")

    def to_ply(self) -> str:
        lines = [
            "ply",
            "format ascii 1.0",
            f"comment units {self.units}",
            f"element vertex {len(self.points)}",
            "property double x",
            "property double y",
            "property double z",
            "property int observation_count",
            "end_header",
        ]
        for p, obs in zip(self.points, self.observations):
            lines.append(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r} {len(obs)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ply(cls, text: str) -> "SparseCloud":
        lines = text.splitlines()
        units = "arbitrary"
        n = 0
        body_start = None
        for i, line in enumerate(lines):
            parts = line.split()
            if parts[:2] == ["comment", "units"] and len(parts) >= 3:
                units = parts[2]
            elif parts[:2] == ["element", "vertex"]:
                n = int(parts[2])
            elif parts and parts[0] == "end_header":
                body_start = i + 1
                break
        if body_start is None:
            raise ValidationError("PLY header missing end_header")
        pts = np.zeros((n, 3))
        counts = []
        for j in range(n):
            vals = lines[body_start + j].split()
            pts[j] = [float(vals[0]), float(vals[1]), float(vals[2])]
            counts.append(int(vals[3]) if len(vals) > 3 else 0)
        # observation pixels are not serialized; keep the counts as placeholders
        obs = [[("", (np.nan, np.nan))] * c for c in counts]
        return cls(points=pts, observations=obs, units=units)


def cameras_to_text(views: dict) -> str:
    """Structured text export: K, row-major R, and t per view."""
    lines = []
    for view_id in sorted(views):
        K, pose = views[view_id]
        lines.append(f"view {view_id}")
        lines.append(
            "K " + " ".join(repr(float(v)) for v in [K.fx, K.fy, K.cx, K.cy, K.skew])
        )
        lines.append("R " + " ".join(repr(float(v)) for v in pose.rotation.reshape(-1)))
        lines.append("t " + " ".join(repr(float(v)) for v in pose.translation))
    return "\n".join(lines) + "\n"
