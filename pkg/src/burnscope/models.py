"""Domain entities and their canonical dict/JSON forms.

Everything persisted into a session manifest lives here. Records hold
plain Python values (no arrays), so loading a manifest reproduces a
value equal to the saved one, field for field.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Optional

from .quality import ConfidenceIndicators, QcVerdict

SCHEMA_VERSION = 1
SUPPORTED_SCHEMA_VERSIONS = frozenset({1})

Clock = Callable[[], datetime]


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def new_id() -> str:
    """Random 128-bit identifier rendered as 32 lowercase hex digits."""
    return secrets.token_hex(16)


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_timestamp(raw: str) -> datetime:
    return datetime.fromisoformat(raw.replace("Z", "+00:00"))


@dataclass
class PatientRecord:
    patient_id: str
    created_at: datetime
    age_years: Optional[float] = None
    weight_kg: Optional[float] = None
    height_cm: Optional[float] = None
    sex: Optional[str] = None

    def __post_init__(self):
        from .errors import ValidationError

        if self.weight_kg is not None and self.weight_kg <= 0:
            raise ValidationError("weight_kg must be positive when present")
        if self.height_cm is not None and self.height_cm <= 0:
            raise ValidationError("height_cm must be positive when present")

    def to_dict(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "created_at": format_timestamp(self.created_at),
            "age_years": self.age_years,
            "weight_kg": self.weight_kg,
            "height_cm": self.height_cm,
            "sex": self.sex,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PatientRecord":
        return cls(
            patient_id=raw["patient_id"],
            created_at=parse_timestamp(raw["created_at"]),
            age_years=raw.get("age_years"),
            weight_kg=raw.get("weight_kg"),
            height_cm=raw.get("height_cm"),
            sex=raw.get("sex"),
        )


# Primary-survey checklist items recorded in emergency mode.
ABCDE_ITEMS = ("airway", "breathing", "circulation", "disability", "exposure")

INTAKE_MODES = ("emergency", "consultation")


@dataclass
class IntakeRecord:
    """Structured intake: mode, mechanism, surveys, and burn descriptors."""

    mode: str
    mechanism_text: str = ""
    mechanism_category: str = "unspecified"
    abcde: dict = field(default_factory=dict)  # item -> finding text
    secondary_findings: str = ""
    burn_site: str = ""
    suspected_depth: str = ""
    circumferential: bool = False
    history: dict = field(default_factory=dict)
    weight_kg: Optional[float] = None
    age_years: Optional[float] = None
    tbsa_percent_manual: Optional[float] = None

    def __post_init__(self):
        from .errors import ValidationError

        if self.mode not in INTAKE_MODES:
            raise ValidationError(f"intake mode must be one of {INTAKE_MODES}")
        if self.mode == "emergency":
            missing = [item for item in ABCDE_ITEMS if item not in self.abcde]
            if missing:
                raise ValidationError(
                    f"emergency intake requires ABCDE items; missing {missing}"
                )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "mechanism_text": self.mechanism_text,
            "mechanism_category": self.mechanism_category,
            "abcde": dict(self.abcde),
            "secondary_findings": self.secondary_findings,
            "burn_site": self.burn_site,
            "suspected_depth": self.suspected_depth,
            "circumferential": self.circumferential,
            "history": dict(self.history),
            "weight_kg": self.weight_kg,
            "age_years": self.age_years,
            "tbsa_percent_manual": self.tbsa_percent_manual,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "IntakeRecord":
        return cls(
            mode=raw["mode"],
            mechanism_text=raw.get("mechanism_text", ""),
            mechanism_category=raw.get("mechanism_category", "unspecified"),
            abcde=dict(raw.get("abcde", {})),
            secondary_findings=raw.get("secondary_findings", ""),
            burn_site=raw.get("burn_site", ""),
            suspected_depth=raw.get("suspected_depth", ""),
            circumferential=raw.get("circumferential", False),
            history=dict(raw.get("history", {})),
            weight_kg=raw.get("weight_kg"),
            age_years=raw.get("age_years"),
            tbsa_percent_manual=raw.get("tbsa_percent_manual"),
        )


@dataclass
class FluidPlan:
    """24 h crystalloid plan: total volume split half over 8 h, half over 16 h."""

    weight_kg: float
    tbsa_percent: float
    coefficient_ml_per_kg_percent: float
    total_ml: float
    first8h_ml: float
    next16h_ml: float
    rate_first8h_ml_per_h: float
    rate_next16h_ml_per_h: float

    def to_dict(self) -> dict:
        return {
            "weight_kg": self.weight_kg,
            "tbsa_percent": self.tbsa_percent,
            "coefficient_ml_per_kg_percent": self.coefficient_ml_per_kg_percent,
            "total_ml": self.total_ml,
            "first8h_ml": self.first8h_ml,
            "next16h_ml": self.next16h_ml,
            "rate_first8h_ml_per_h": self.rate_first8h_ml_per_h,
            "rate_next16h_ml_per_h": self.rate_next16h_ml_per_h,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "FluidPlan":
        return cls(**{k: raw[k] for k in cls.__dataclass_fields__})


@dataclass
class BurnMetrics:
    """Geometry-derived wound metrics on a metrically scaled mesh."""

    area_cm2: float
    perimeter_cm: float
    d_max_mm: float
    d_avg_mm: float
    volume_proxy_cm3: float
    computed_at: datetime
    tbsa_percent: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "area_cm2": self.area_cm2,
            "perimeter_cm": self.perimeter_cm,
            "d_max_mm": self.d_max_mm,
            "d_avg_mm": self.d_avg_mm,
            "volume_proxy_cm3": self.volume_proxy_cm3,
            "tbsa_percent": self.tbsa_percent,
            "computed_at": format_timestamp(self.computed_at),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "BurnMetrics":
        return cls(
            area_cm2=raw["area_cm2"],
            perimeter_cm=raw["perimeter_cm"],
            d_max_mm=raw["d_max_mm"],
            d_avg_mm=raw["d_avg_mm"],
            volume_proxy_cm3=raw["volume_proxy_cm3"],
            computed_at=parse_timestamp(raw["computed_at"]),
            tbsa_percent=raw.get("tbsa_percent"),
        )


@dataclass
class ArtifactRef:
    """File owned by a session: relative path plus tamper-evidence hash."""

    relpath: str
    sha256: str
    kind: str  # image | mask | mesh | cloud | features | report | cameras

    def to_dict(self) -> dict:
        return {"relpath": self.relpath, "sha256": self.sha256, "kind": self.kind}

    @classmethod
    def from_dict(cls, raw: dict) -> "ArtifactRef":
        return cls(relpath=raw["relpath"], sha256=raw["sha256"], kind=raw["kind"])


@dataclass
class CameraViewRecord:
    """One capture viewpoint: image artifact, QC verdict, and recovered camera."""

    view_id: str
    image: ArtifactRef
    width: int
    height: int
    qc: Optional[QcVerdict] = None
    intrinsics: Optional[list] = None  # [fx, fy, cx, cy, skew]
    rotation: Optional[list] = None  # 9 floats, row-major
    translation: Optional[list] = None  # 3 floats

    def to_dict(self) -> dict:
        return {
            "view_id": self.view_id,
            "image": self.image.to_dict(),
            "width": self.width,
            "height": self.height,
            "qc": self.qc.to_dict() if self.qc else None,
            "intrinsics": self.intrinsics,
            "rotation": self.rotation,
            "translation": self.translation,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "CameraViewRecord":
        return cls(
            view_id=raw["view_id"],
            image=ArtifactRef.from_dict(raw["image"]),
            width=raw["width"],
            height=raw["height"],
            qc=QcVerdict.from_dict(raw["qc"]) if raw.get("qc") else None,
            intrinsics=raw.get("intrinsics"),
            rotation=raw.get("rotation"),
            translation=raw.get("translation"),
        )


@dataclass
class MaskRecord:
    mask_id: str
    view_id: str
    artifact: ArtifactRef

    def to_dict(self) -> dict:
        return {
            "mask_id": self.mask_id,
            "view_id": self.view_id,
            "artifact": self.artifact.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MaskRecord":
        return cls(
            mask_id=raw["mask_id"],
            view_id=raw["view_id"],
            artifact=ArtifactRef.from_dict(raw["artifact"]),
        )


@dataclass
class MeshRecord:
    artifact: ArtifactRef
    units: str = "cm"  # "arbitrary" | "cm"
    n_vertices: int = 0
    n_faces: int = 0

    def to_dict(self) -> dict:
        return {
            "artifact": self.artifact.to_dict(),
            "units": self.units,
            "n_vertices": self.n_vertices,
            "n_faces": self.n_faces,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MeshRecord":
        return cls(
            artifact=ArtifactRef.from_dict(raw["artifact"]),
            units=raw.get("units", "cm"),
            n_vertices=raw.get("n_vertices", 0),
            n_faces=raw.get("n_faces", 0),
        )


@dataclass
class ScaleReference:
    """Two reference points designated as pixels in two views plus a known distance.

    Each point is lifted to 3D by triangulating its pixel in view_a
    against its pixel in view_b.
    """

    view_a: str
    view_b: str
    point1_pixels: list  # [[xa, ya], [xb, yb]]
    point2_pixels: list
    known_distance_cm: float
    scale_factor: Optional[float] = None  # filled once applied
    model_distance: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "view_a": self.view_a,
            "view_b": self.view_b,
            "point1_pixels": self.point1_pixels,
            "point2_pixels": self.point2_pixels,
            "known_distance_cm": self.known_distance_cm,
            "scale_factor": self.scale_factor,
            "model_distance": self.model_distance,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ScaleReference":
        return cls(
            view_a=raw["view_a"],
            view_b=raw["view_b"],
            point1_pixels=raw["point1_pixels"],
            point2_pixels=raw["point2_pixels"],
            known_distance_cm=raw["known_distance_cm"],
            scale_factor=raw.get("scale_factor"),
            model_distance=raw.get("model_distance"),
        )


@dataclass
class AlignmentRecord:
    """Rigid transform taking this session's mesh onto the baseline session's."""

    baseline_session_id: str
    rotation: list  # 9 floats, row-major
    translation: list  # 3 floats
    rms: float
    iterations: int

    def to_dict(self) -> dict:
        return {
            "baseline_session_id": self.baseline_session_id,
            "rotation": self.rotation,
            "translation": self.translation,
            "rms": self.rms,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AlignmentRecord":
        return cls(
            baseline_session_id=raw["baseline_session_id"],
            rotation=raw["rotation"],
            translation=raw["translation"],
            rms=raw["rms"],
            iterations=raw["iterations"],
        )


@dataclass
class ReportRef:
    version: int
    content_hash: str
    structured: ArtifactRef
    html: ArtifactRef

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "content_hash": self.content_hash,
            "structured": self.structured.to_dict(),
            "html": self.html.to_dict(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ReportRef":
        return cls(
            version=raw["version"],
            content_hash=raw["content_hash"],
            structured=ArtifactRef.from_dict(raw["structured"]),
            html=ArtifactRef.from_dict(raw["html"]),
        )


@dataclass
class AssessmentSession:
    """Time-stamped container for one patient visit.

    ``captured_at`` is set at creation and never mutated afterwards.
    """

    session_id: str
    patient_id: str
    captured_at: datetime
    intake: IntakeRecord
    views: list = field(default_factory=list)  # [CameraViewRecord]
    masks: list = field(default_factory=list)  # [MaskRecord]
    reconstruction: Optional[MeshRecord] = None
    sparse_cloud: Optional[ArtifactRef] = None
    scale_ref: Optional[ScaleReference] = None
    metrics: Optional[BurnMetrics] = None
    fluids: Optional[FluidPlan] = None
    confidence: Optional[ConfidenceIndicators] = None
    alignment: Optional[AlignmentRecord] = None
    report: Optional[ReportRef] = None
    schema_version: int = SCHEMA_VERSION

    def artifacts(self) -> list[ArtifactRef]:
        """Every artifact this session owns, in manifest order."""
        refs = [v.image for v in self.views]
        refs.extend(m.artifact for m in self.masks)
        if self.reconstruction:
            refs.append(self.reconstruction.artifact)
        if self.sparse_cloud:
            refs.append(self.sparse_cloud)
        if self.report:
            refs.extend([self.report.structured, self.report.html])
        return refs

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "patient_id": self.patient_id,
            "captured_at": format_timestamp(self.captured_at),
            "intake": self.intake.to_dict(),
            "views": [v.to_dict() for v in self.views],
            "masks": [m.to_dict() for m in self.masks],
            "reconstruction": self.reconstruction.to_dict() if self.reconstruction else None,
            "sparse_cloud": self.sparse_cloud.to_dict() if self.sparse_cloud else None,
            "scale_ref": self.scale_ref.to_dict() if self.scale_ref else None,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "fluids": self.fluids.to_dict() if self.fluids else None,
            "confidence": self.confidence.to_dict() if self.confidence else None,
            "alignment": self.alignment.to_dict() if self.alignment else None,
            "report": self.report.to_dict() if self.report else None,
            "schema_version": self.schema_version,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "AssessmentSession":
        return cls(
            session_id=raw["session_id"],
            patient_id=raw["patient_id"],
            captured_at=parse_timestamp(raw["captured_at"]),
            intake=IntakeRecord.from_dict(raw["intake"]),
            views=[CameraViewRecord.from_dict(v) for v in raw.get("views", [])],
            masks=[MaskRecord.from_dict(m) for m in raw.get("masks", [])],
            reconstruction=MeshRecord.from_dict(raw["reconstruction"])
            if raw.get("reconstruction")
            else None,
            sparse_cloud=ArtifactRef.from_dict(raw["sparse_cloud"])
            if raw.get("sparse_cloud")
            else None,
            scale_ref=ScaleReference.from_dict(raw["scale_ref"])
            if raw.get("scale_ref")
            else None,
            metrics=BurnMetrics.from_dict(raw["metrics"]) if raw.get("metrics") else None,
            fluids=FluidPlan.from_dict(raw["fluids"]) if raw.get("fluids") else None,
            confidence=ConfidenceIndicators.from_dict(raw["confidence"])
            if raw.get("confidence")
            else None,
            alignment=AlignmentRecord.from_dict(raw["alignment"])
            if raw.get("alignment")
            else None,
            report=ReportRef.from_dict(raw["report"]) if raw.get("report") else None,
            schema_version=raw["schema_version"],
        )
