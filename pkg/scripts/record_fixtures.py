"""Record real API responses as JSON fixtures for the console contract tests.

Run from the repository root:

    python3 scripts/record_fixtures.py

Builds a throwaway store with three analyzed sessions (days 0/7/14) via
the mesh-direct route plus one failing image job, then saves the exact
payloads the HTTP API serves.
"""

from __future__ import annotations

import json
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from burnscope.config import ServiceConfig
from burnscope.models import IntakeRecord, MeshRecord, PatientRecord
from burnscope.quality import ImageBuffer, QcPolicy
from burnscope.service.app import create_app
from burnscope.synthetic import crater_mesh

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def fixed_clock(iso):
    stamp = datetime.fromisoformat(iso.replace("Z", "+00:00"))
    return lambda: stamp


def poll(client, job_id, timeout=120.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        snapshot = client.get(f"/jobs/{job_id}").json()
        if snapshot["state"] in ("done", "failed"):
            return snapshot
        time.sleep(0.1)
    raise TimeoutError(job_id)


def noise_image(seed, size=(320, 240)):
    from scipy import ndimage

    rng = np.random.default_rng(seed)
    tex = ndimage.gaussian_filter(rng.random((size[1], size[0])), 1.0)
    tex = (tex - tex.min()) / (tex.max() - tex.min())
    return ImageBuffer(np.round(40 + tex * 170).astype(np.uint8))


def main():
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        config = ServiceConfig(seed=5)
        config.qc = QcPolicy(min_width=320, min_height=240, min_images=6)
        app = create_app(tmp, config)
        client = TestClient(app)
        store = app.state.store

        patient = PatientRecord(
            patient_id="fixture-patient",
            created_at=fixed_clock("2026-02-01T09:00:00Z")(),
            age_years=34,
            weight_kg=70.0,
            height_cm=170.0,
            sex="F",
        )
        store.add_patient(patient)

        intake = IntakeRecord(
            mode="consultation",
            mechanism_text="scald from kettle",
            mechanism_category="scald",
            burn_site="left forearm",
            weight_kg=70.0,
            age_years=34,
        )
        stamps = ["2026-03-01T10:00:00Z", "2026-03-08T10:00:00Z", "2026-03-15T10:00:00Z"]
        shrink = [1.0, 0.85, 0.7]
        session_ids = []
        done_snapshot = None
        for ts, s in zip(stamps, shrink):
            session = store.create_session(patient, intake, fixed_clock(ts))
            mesh = crater_mesh(
                crater_radius=2.0 * s, outer_radius=4.0, depth=0.5 * s,
                n_rings=24, n_theta=36,
            )
            ref = store.add_artifact(
                session, "mesh", "mesh_ingested.ply", mesh.to_ply_bytes()
            )
            session.reconstruction = MeshRecord(
                artifact=ref, units="cm",
                n_vertices=mesh.n_vertices, n_faces=mesh.n_faces,
            )
            store.persist_session(session)
            job_id = client.post(f"/sessions/{session.session_id}/analyze", json={}).json()["job_id"]
            done_snapshot = poll(client, job_id)
            assert done_snapshot["state"] == "done", done_snapshot
            session_ids.append(session.session_id)

        # failing job: six sharp but unrelated images starve the matcher at sfm
        failing = client.post(
            "/patients/fixture-patient/sessions",
            json={"intake": {"mode": "consultation"}},
        ).json()
        files = [
            ("files", (f"u{i}.png", noise_image(200 + i).to_png_bytes(), "image/png"))
            for i in range(6)
        ]
        client.post(f"/sessions/{failing['session_id']}/images", files=files)
        failed_job = client.post(f"/sessions/{failing['session_id']}/analyze", json={}).json()
        failed_snapshot = poll(client, failed_job["job_id"])
        assert failed_snapshot["state"] == "failed", failed_snapshot
        assert failed_snapshot["error_stage"] == "sfm", failed_snapshot

        fixtures = {
            "config.json": client.get("/config").json(),
            "timeline.json": client.get("/patients/fixture-patient/timeline").json(),
            "metrics.json": client.get(f"/sessions/{session_ids[-1]}/metrics").json(),
            "report.json": client.get(f"/sessions/{session_ids[-1]}/report").json(),
            "job_done.json": done_snapshot,
            "job_failed.json": failed_snapshot,
            "job_not_found.json": {
                "status": client.get("/jobs/nope").status_code,
                "body": client.get("/jobs/nope").json(),
            },
        }
        for name, payload in fixtures.items():
            (FIXTURE_DIR / name).write_text(json.dumps(payload, indent=2) + "\n")
            print(f"wrote {FIXTURE_DIR / name}")


if __name__ == "__main__":
    sys.exit(main())
