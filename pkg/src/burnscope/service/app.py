"""HTTP JSON API over the session store and analysis pipeline."""

from __future__ import annotations

import json
import threading
from typing import Optional

from fastapi import FastAPI, File, Query, Request, UploadFile
from fastapi.responses import HTMLResponse, JSONResponse

from .. import errors
from ..config import ServiceConfig
from ..mesh import LabeledMesh
from ..models import (
    AssessmentSession,
    CameraViewRecord,
    IntakeRecord,
    MaskRecord,
    MeshRecord,
    PatientRecord,
    ScaleReference,
    new_id,
    utc_now,
)
from ..pipeline import PipelineContext
from ..quality import ImageBuffer, assess_image
from ..store import SessionStore
from .jobs import JobRunner

ERROR_STATUS = {
    errors.NotFoundError: 404,
    errors.ConflictError: 409,
    errors.ValidationError: 422,
    errors.IncompleteSessionError: 422,
    errors.VersionError: 409,
    errors.IntegrityError: 500,
    errors.ManifestParseError: 500,
}


def _status_for(exc: errors.BurnscopeError) -> int:
    for klass, status in ERROR_STATUS.items():
        if isinstance(exc, klass):
            return status
    return 500


def create_app(store_root, config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    store = SessionStore(store_root)
    context = PipelineContext(store=store, config=config)
    runner = JobRunner(context)
    write_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def session_lock(session_id: str) -> threading.Lock:
        with locks_guard:
            return write_locks.setdefault(session_id, threading.Lock())

    app = FastAPI(title="burnscope", version="0.1.0")
    app.state.store = store
    app.state.config = config
    app.state.runner = runner
    app.state.context = context

    @app.exception_handler(errors.BurnscopeError)
    async def handle_domain_error(request: Request, exc: errors.BurnscopeError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    # ------------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/config")
    def get_config():
        return config.public_dict()

    @app.post("/patients", status_code=201)
    def create_patient(payload: dict):
        patient = PatientRecord(
            patient_id=payload.get("patient_id") or new_id(),
            created_at=utc_now(),
            age_years=payload.get("age_years"),
            weight_kg=payload.get("weight_kg"),
            height_cm=payload.get("height_cm"),
            sex=payload.get("sex"),
        )
        store.add_patient(patient)
        return patient.to_dict()

    @app.get("/patients/{patient_id}")
    def get_patient(patient_id: str):
        return store.get_patient(patient_id).to_dict()

    @app.post("/patients/{patient_id}/sessions", status_code=201)
    def create_session(patient_id: str, payload: dict):
        intake = IntakeRecord.from_dict(payload.get("intake", {"mode": "consultation"}))
        session = store.create_session(patient_id, intake)
        store.persist_session(session)
        return session.to_dict()

    def _load_for_write(session_id: str) -> AssessmentSession:
        return store.load_session(session_id)

    @app.post("/sessions/{session_id}/images")
    async def upload_images(session_id: str, files: list[UploadFile] = File(...)):
        lock = session_lock(session_id)
        with lock:
            session = _load_for_write(session_id)
            results = []
            for upload in files:
                data = await upload.read()
                image = ImageBuffer.from_bytes(data)
                verdict = assess_image(image, config.qc)
                view_id = f"v{len(session.views):03d}"
                ref = store.add_artifact(
                    session, "image", f"{view_id}.png", image.to_png_bytes(), subdir="images"
                )
                session.views.append(
                    CameraViewRecord(
                        view_id=view_id,
                        image=ref,
                        width=image.width,
                        height=image.height,
                        qc=verdict,
                    )
                )
                results.append({"view_id": view_id, "verdict": verdict.to_dict()})
            store.persist_session(session)
        return {"views": results}

    @app.post("/sessions/{session_id}/masks")
    async def upload_masks(session_id: str, files: list[UploadFile] = File(...)):
        """Mask filenames must be `<view_id>.png`, pairing each mask to its view."""
        lock = session_lock(session_id)
        with lock:
            session = _load_for_write(session_id)
            known_views = {v.view_id for v in session.views}
            results = []
            for upload in files:
                view_id = (upload.filename or "").rsplit(".", 1)[0]
                if view_id not in known_views:
                    raise errors.ValidationError(
                        f"mask filename {upload.filename!r} does not name a session view"
                    )
                data = await upload.read()
                mask_id = f"m-{view_id}"
                ref = store.add_artifact(
                    session, "mask", f"{view_id}.png", data, subdir="masks"
                )
                session.masks = [m for m in session.masks if m.view_id != view_id]
                session.masks.append(
                    MaskRecord(mask_id=mask_id, view_id=view_id, artifact=ref)
                )
                results.append({"mask_id": mask_id, "view_id": view_id})
            store.persist_session(session)
        return {"masks": results}

    @app.post("/sessions/{session_id}/mesh")
    async def upload_mesh(session_id: str, file: UploadFile = File(...)):
        lock = session_lock(session_id)
        with lock:
            session = _load_for_write(session_id)
            data = await file.read()
            mesh = LabeledMesh.from_ply_bytes(data)  # validates the document
            ref = store.add_artifact(session, "mesh", "mesh_ingested.ply", data)
            session.reconstruction = MeshRecord(
                artifact=ref,
                units=mesh.units,
                n_vertices=mesh.n_vertices,
                n_faces=mesh.n_faces,
            )
            store.persist_session(session)
        return {"units": mesh.units, "n_vertices": mesh.n_vertices, "n_faces": mesh.n_faces}

    @app.post("/sessions/{session_id}/scale")
    def set_scale(session_id: str, payload: dict):
        lock = session_lock(session_id)
        with lock:
            session = _load_for_write(session_id)
            if payload["known_distance_cm"] <= 0:
                raise errors.ValidationError("known_distance_cm must be positive")
            session.scale_ref = ScaleReference(
                view_a=payload["view_a"],
                view_b=payload["view_b"],
                point1_pixels=payload["point1_pixels"],
                point2_pixels=payload["point2_pixels"],
                known_distance_cm=payload["known_distance_cm"],
            )
            store.persist_session(session)
            return session.scale_ref.to_dict()

    @app.post("/sessions/{session_id}/analyze", status_code=202)
    def analyze(session_id: str, payload: Optional[dict] = None):
        session = store.load_session(session_id)
        if not context.mesh_direct(session):
            accepted = sum(1 for v in session.views if v.qc and v.qc.accepted)
            if accepted < config.qc.min_images:
                raise errors.ValidationError(
                    f"only {accepted} accepted image(s); at least "
                    f"{config.qc.min_images} required (or ingest a mesh directly)"
                )
        job_id = runner.submit(session_id)
        return {"job_id": job_id, "state": "queued"}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        return runner.status(job_id)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return store.load_session(session_id).to_dict()

    @app.get("/sessions/{session_id}/metrics")
    def get_metrics(session_id: str):
        session = store.load_session(session_id)
        if session.metrics is None:
            raise errors.IncompleteSessionError(
                f"session {session_id} has no metrics yet"
            )
        payload = session.metrics.to_dict()
        payload["confidence"] = session.confidence.to_dict() if session.confidence else None
        payload["fluids"] = session.fluids.to_dict() if session.fluids else None
        return payload

    @app.get("/patients/{patient_id}/timeline")
    def get_timeline(patient_id: str):
        store.get_patient(patient_id)
        series = context.patient_series(patient_id)
        sessions = store.list_sessions(patient_id)
        cards = [
            {
                "session_id": s.session_id,
                "captured_at": s.to_dict()["captured_at"],
                "has_metrics": s.metrics is not None,
                "metrics": s.metrics.to_dict() if s.metrics else None,
            }
            for s in sessions
        ]
        return {
            "patient_id": patient_id,
            "sessions": cards,
            "series": series.to_dict() if series else None,
        }

    @app.get("/sessions/{session_id}/report")
    def get_report(session_id: str, format: str = Query("structured")):
        session = store.load_session(session_id)
        if session.report is None:
            raise errors.IncompleteSessionError(
                f"session {session_id} has no report yet"
            )
        if format == "html":
            data = store.read_artifact(session, session.report.html)
            return HTMLResponse(content=data.decode("utf-8"))
        if format == "structured":
            data = store.read_artifact(session, session.report.structured)
            return JSONResponse(content=json.loads(data))
        raise errors.ValidationError(f"unknown report format {format!r}")

    return app
