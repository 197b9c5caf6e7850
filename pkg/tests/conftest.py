"""Shared fixtures: stores, sessions, and a cached synthetic capture."""

from __future__ import annotations

from datetime import datetime

import numpy as np
import pytest

from burnscope.models import IntakeRecord, PatientRecord
from burnscope.store import SessionStore


def fixed_clock(iso: str = "2026-03-01T10:00:00Z"):
    stamp = datetime.fromisoformat(iso.replace("Z", "+00:00"))
    return lambda: stamp


@pytest.fixture
def store(tmp_path):
    return SessionStore(tmp_path / "store")


@pytest.fixture
def patient(store):
    record = PatientRecord(
        patient_id="p-001",
        created_at=fixed_clock()(),
        age_years=34,
        weight_kg=70.0,
        height_cm=170.0,
        sex="F",
    )
    store.add_patient(record)
    return record


@pytest.fixture
def consultation_intake():
    return IntakeRecord(
        mode="consultation",
        mechanism_text="scald from kettle",
        mechanism_category="scald",
        burn_site="left forearm",
        suspected_depth="superficial partial",
        weight_kg=70.0,
        age_years=34,
    )


@pytest.fixture
def emergency_intake():
    return IntakeRecord(
        mode="emergency",
        mechanism_text="house fire",
        mechanism_category="flame",
        abcde={
            "airway": "patent",
            "breathing": "equal air entry",
            "circulation": "tachycardic",
            "disability": "GCS 15",
            "exposure": "30% estimated",
        },
        burn_site="torso",
        suspected_depth="deep partial",
        circumferential=False,
        weight_kg=70.0,
        age_years=34,
    )


class SceneCache:
    """Renders and feature-extracts the synthetic capture once per test run."""

    def __init__(self):
        self._scene = None
        self._features = None

    def scene(self):
        if self._scene is None:
            from burnscope.synthetic import build_tent_scene

            self._scene = build_tent_scene(np.random.default_rng(42), n_views=8)
        return self._scene

    def features(self):
        if self._features is None:
            from burnscope.features import (
                DetectParams,
                build_scale_space,
                compute_descriptors,
                detect_keypoints,
                match_descriptors,
            )

            scene = self.scene()
            kp_pixels, descs = {}, {}
            for i in range(len(scene.poses)):
                space = build_scale_space(scene.render_view(i))
                kps = detect_keypoints(
                    space, DetectParams(contrast_threshold=0.015, max_keypoints=1200)
                )
                res = compute_descriptors(space, kps)
                kept = [kps[j] for j in res.keypoint_indices]
                kp_pixels[i] = np.array([[k.x, k.y] for k in kept])
                descs[i] = res.descriptors
            pair_matches = {}
            for a in range(len(scene.poses)):
                for b in range(a + 1, len(scene.poses)):
                    ms = match_descriptors(descs[a], descs[b], 0.75)
                    good = np.array(
                        [[m.index_a, m.index_b] for m in ms if m.passed_ratio]
                    )
                    if len(good) >= 30:
                        pair_matches[(a, b)] = good
            self._features = (kp_pixels, pair_matches)
        return self._features


_SCENE_CACHE = SceneCache()


@pytest.fixture(scope="session")
def synthetic_capture():
    return _SCENE_CACHE


def service_test_config():
    """Service config sized for the synthetic fixture renders."""
    from burnscope.config import ServiceConfig
    from burnscope.quality import QcPolicy

    config = ServiceConfig(seed=7)
    config.qc = QcPolicy(min_width=320, min_height=240, min_images=6)
    scene = _SCENE_CACHE.scene()
    config.camera = {
        "fx": scene.intrinsics.fx,
        "fy": scene.intrinsics.fy,
        "cx": scene.intrinsics.cx,
        "cy": scene.intrinsics.cy,
    }
    config.detect = config.detect.__class__(contrast_threshold=0.015, max_keypoints=1200)
    return config


def upload_synthetic_capture(client, patient_id, mesh_cells=16):
    """Drive the full REST flow for the cached synthetic scene; returns ids."""
    from burnscope.geometry.camera import project_point
    from burnscope.mapping import BurnMask

    scene = _SCENE_CACHE.scene()
    response = client.post(
        f"/patients/{patient_id}/sessions",
        json={"intake": {"mode": "consultation", "mechanism_category": "scald",
                          "weight_kg": 70.0, "age_years": 34}},
    )
    assert response.status_code == 201, response.text
    session_id = response.json()["session_id"]

    files = []
    for i in range(len(scene.poses)):
        files.append(
            ("files", (f"img{i}.png", scene.render_view(i).to_png_bytes(), "image/png"))
        )
    response = client.post(f"/sessions/{session_id}/images", files=files)
    assert response.status_code == 200, response.text
    view_ids = [v["view_id"] for v in response.json()["views"]]
    assert all(v["verdict"]["accepted"] for v in response.json()["views"])

    mask_files = []
    for i, view_id in enumerate(view_ids):
        mask = BurnMask(scene.render_mask(i))
        mask_files.append(("files", (f"{view_id}.png", mask.to_png_bytes(), "image/png")))
    response = client.post(f"/sessions/{session_id}/masks", files=mask_files)
    assert response.status_code == 200, response.text

    mesh = scene.ground_truth_mesh(cells_u=mesh_cells, cells_v=mesh_cells)
    response = client.post(
        f"/sessions/{session_id}/mesh",
        files={"file": ("mesh.ply", mesh.to_ply_bytes(), "application/octet-stream")},
    )
    assert response.status_code == 200, response.text

    p1, p2, distance = scene.scale_reference()
    payload = {
        "view_a": view_ids[0],
        "view_b": view_ids[1],
        "point1_pixels": [
            [float(x) for x in project_point(scene.intrinsics, scene.poses[0], p1)],
            [float(x) for x in project_point(scene.intrinsics, scene.poses[1], p1)],
        ],
        "point2_pixels": [
            [float(x) for x in project_point(scene.intrinsics, scene.poses[0], p2)],
            [float(x) for x in project_point(scene.intrinsics, scene.poses[1], p2)],
        ],
        "known_distance_cm": distance,
    }
    response = client.post(f"/sessions/{session_id}/scale", json=payload)
    assert response.status_code == 200, response.text
    return session_id, view_ids


def poll_job(client, job_id, timeout_s=180.0):
    import time

    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        response = client.get(f"/jobs/{job_id}")
        assert response.status_code == 200
        snapshot = response.json()
        if snapshot["state"] in ("done", "failed"):
            return snapshot
        time.sleep(0.1)
    raise TimeoutError(f"job {job_id} did not finish")
