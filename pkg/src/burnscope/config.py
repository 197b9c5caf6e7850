"""Service configuration: QC policy, camera intrinsics, stage parameters."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .features.detect import DetectParams
from .features.scale_space import ScaleSpaceParams
from .geometry.camera import CameraIntrinsics
from .mapping import FusionParams
from .quality import QcPolicy


@dataclass
class ServiceConfig:
    qc: QcPolicy = field(default_factory=QcPolicy)
    camera: Optional[dict] = None  # {"fx", "fy", "cx", "cy", "skew"}; cx/cy optional
    detect: DetectParams = field(default_factory=lambda: DetectParams(max_keypoints=1500))
    scale_space: ScaleSpaceParams = field(default_factory=ScaleSpaceParams)
    ratio_threshold: float = 0.75
    min_pair_matches: int = 30
    fusion: FusionParams = field(default_factory=FusionParams)
    register_mesh: bool = True  # ICP the ingested mesh onto the scaled cloud
    ring_hops: int = 2
    reference_fit: str = "plane"  # "plane" | "quadratic"
    ruleset_path: Optional[str] = None
    seed: Optional[int] = None

    def intrinsics_for(self, width: int, height: int) -> CameraIntrinsics:
        """Known-camera intrinsics from configuration; principal point defaults
        to the image center."""
        cam = self.camera or {}
        fx = cam.get("fx", 0.9 * max(width, height))
        fy = cam.get("fy", fx)
        return CameraIntrinsics(
            fx=fx,
            fy=fy,
            cx=cam.get("cx", (width - 1) / 2.0),
            cy=cam.get("cy", (height - 1) / 2.0),
            skew=cam.get("skew", 0.0),
        )

    @classmethod
    def from_dict(cls, raw: dict) -> "ServiceConfig":
        cfg = cls()
        if "qc" in raw:
            cfg.qc = QcPolicy.from_dict(raw["qc"])
        cfg.camera = raw.get("camera", cfg.camera)
        if "detect" in raw:
            known = {
                k: v for k, v in raw["detect"].items()
                if k in DetectParams.__dataclass_fields__
            }
            cfg.detect = DetectParams(**known)
        if "scale_space" in raw:
            known = {
                k: v for k, v in raw["scale_space"].items()
                if k in ScaleSpaceParams.__dataclass_fields__
            }
            cfg.scale_space = ScaleSpaceParams(**known)
        if "fusion" in raw:
            known = {
                k: v for k, v in raw["fusion"].items()
                if k in FusionParams.__dataclass_fields__
            }
            cfg.fusion = FusionParams(**known)
        cfg.ratio_threshold = raw.get("ratio_threshold", cfg.ratio_threshold)
        cfg.min_pair_matches = raw.get("min_pair_matches", cfg.min_pair_matches)
        cfg.register_mesh = raw.get("register_mesh", cfg.register_mesh)
        cfg.ring_hops = raw.get("ring_hops", cfg.ring_hops)
        cfg.reference_fit = raw.get("reference_fit", cfg.reference_fit)
        cfg.ruleset_path = raw.get("ruleset_path", cfg.ruleset_path)
        cfg.seed = raw.get("seed", cfg.seed)
        return cfg

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def public_dict(self) -> dict:
        """Fields the web console needs (capture policy, intake contract)."""
        from .models import ABCDE_ITEMS

        return {
            "min_images": self.qc.min_images,
            "min_width": self.qc.min_width,
            "min_height": self.qc.min_height,
            "blur_threshold": self.qc.blur_threshold,
            "ratio_threshold": self.ratio_threshold,
            "intake_schema": {
                "modes": ["emergency", "consultation"],
                "common_fields": [
                    "mechanism_text",
                    "mechanism_category",
                    "burn_site",
                    "suspected_depth",
                    "circumferential",
                ],
                "emergency_required": ["weight_kg", "age_years"]
                + [f"abcde.{item}" for item in ABCDE_ITEMS],
            },
        }
