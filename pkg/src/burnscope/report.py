"""Deterministic clinical report compilation: canonical JSON body plus HTML.

Every value in a report is taken verbatim from the stored session;
nothing is recomputed here. The content hash covers the canonical body
and excludes the generation timestamp, so regenerating an unchanged
session yields the same hash.
"""

from __future__ import annotations

import hashlib
import html
import json
from dataclasses import dataclass
from typing import Optional

from .clinical import RecommendationSet
from .errors import IntegrityError
from .longitudinal import HealingSeries
from .models import (
    AssessmentSession,
    Clock,
    PatientRecord,
    format_timestamp,
    utc_now,
)

DISCLAIMER = (
    "This report is decision support generated from geometry-derived "
    "measurements. It does not replace clinical examination or clinician "
    "judgement; all treatment decisions remain with the treating team."
)

NOT_PERFORMED = "not performed"


@dataclass
class ReportDocument:
    body: dict  # ordered sections of plain values
    generated_at: str
    content_hash: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "generated_at": self.generated_at,
                "content_hash": self.content_hash,
                "body": self.body,
            },
            indent=2,
        )

    def to_html(self) -> str:
        parts = [
            "<!doctype html>",
            "<html><head><meta charset='utf-8'>",
            "<title>Burn assessment report</title>",
            "<style>body{font-family:sans-serif;margin:2em}h2{border-bottom:1px solid #999}"
            "table{border-collapse:collapse}td,th{padding:2px 10px;text-align:left}"
            ".disclaimer{background:#fff3cd;padding:1em;margin-top:2em}</style>",
            "</head><body>",
            "<h1>Burn assessment report</h1>",
            f"<p>Generated at {html.escape(self.generated_at)} "
            f"(content hash <code>{self.content_hash[:16]}</code>)</p>",
        ]
        for section, content in self.body.items():
            if section == "disclaimers":
                continue
            parts.append(f"<section><h2>{html.escape(section)}</h2>")
            parts.append("<table>")
            for field, value in flatten_fields(content):
                parts.append(
                    f"<tr><th>{html.escape(field)}</th>"
                    f"<td data-field=\"{html.escape(field, quote=True)}\">"
                    f"{html.escape(render_value(value))}</td></tr>"
                )
            parts.append("</table></section>")
        parts.append(f"<div class='disclaimer'>{html.escape(self.body['disclaimers'])}</div>")
        parts.append("</body></html>")
        return "\n".join(parts)


def render_value(value) -> str:
    """Canonical text for a leaf value; floats keep full repr precision."""
    if value is None:
        return NOT_PERFORMED
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def flatten_fields(content, prefix: str = "") -> list:
    """Flatten nested dicts and lists into (dotted field, leaf value) pairs."""
    if isinstance(content, dict):
        pairs = []
        for key, value in content.items():
            path = f"{prefix}.{key}" if prefix else str(key)
            pairs.extend(flatten_fields(value, path))
        return pairs
    if isinstance(content, (list, tuple)):
        pairs = []
        for i, value in enumerate(content):
            pairs.extend(flatten_fields(value, f"{prefix}[{i}]"))
        return pairs
    return [(prefix or "value", content)]


def canonical_body_hash(body: dict) -> str:
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def generate_report(
    session: AssessmentSession,
    patient: Optional[PatientRecord] = None,
    series: Optional[HealingSeries] = None,
    recommendations: Optional[RecommendationSet] = None,
    clock: Clock = utc_now,
) -> ReportDocument:
    """Compile a session into a report document; deterministic under a fixed clock."""
    if session.metrics is not None and session.reconstruction is None:
        raise IntegrityError(
            f"session {session.session_id} has metrics but no reconstruction; "
            "refusing to report an inconsistent session"
        )

    body: dict = {}
    body["patient"] = (
        {
            "patient_id": patient.patient_id,
            "age_years": patient.age_years,
            "weight_kg": patient.weight_kg,
            "height_cm": patient.height_cm,
            "sex": patient.sex,
        }
        if patient
        else {"patient_id": session.patient_id}
    )
    body["session"] = {
        "session_id": session.session_id,
        "captured_at": format_timestamp(session.captured_at),
        "schema_version": session.schema_version,
    }
    body["intake"] = session.intake.to_dict()

    if session.views:
        body["acquisition_qc"] = {
            "n_images": len(session.views),
            "n_accepted": sum(1 for v in session.views if v.qc and v.qc.accepted),
            "verdicts": [
                {"view_id": v.view_id, **(v.qc.to_dict() if v.qc else {"accepted": None})}
                for v in session.views
            ],
        }
    else:
        body["acquisition_qc"] = NOT_PERFORMED

    if session.reconstruction:
        body["reconstruction"] = {
            "units": session.reconstruction.units,
            "n_vertices": session.reconstruction.n_vertices,
            "n_faces": session.reconstruction.n_faces,
            "scale_factor": session.scale_ref.scale_factor if session.scale_ref else None,
        }
    else:
        body["reconstruction"] = NOT_PERFORMED

    body["metrics"] = session.metrics.to_dict() if session.metrics else NOT_PERFORMED
    body["fluids"] = session.fluids.to_dict() if session.fluids else NOT_PERFORMED
    body["longitudinal"] = series.to_dict() if series is not None else NOT_PERFORMED
    body["recommendations"] = (
        recommendations.to_dict() if recommendations is not None else NOT_PERFORMED
    )
    body["confidence"] = session.confidence.to_dict() if session.confidence else NOT_PERFORMED
    body["disclaimers"] = DISCLAIMER

    return ReportDocument(
        body=body,
        generated_at=format_timestamp(clock()),
        content_hash=canonical_body_hash(body),
    )
