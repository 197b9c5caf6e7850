"""Session persistence: round trips, versioned manifests, integrity guards."""

import json

import numpy as np
import pytest

from burnscope.errors import (
    IntegrityError,
    ManifestParseError,
    NotFoundError,
    ValidationError,
    VersionError,
)
from burnscope.models import (
    ArtifactRef,
    AssessmentSession,
    BurnMetrics,
    CameraViewRecord,
    ConfidenceIndicators,
    FluidPlan,
    IntakeRecord,
    MaskRecord,
    MeshRecord,
    PatientRecord,
    ScaleReference,
)
from conftest import fixed_clock


def make_random_session(store, patient, rng) -> AssessmentSession:
    """Randomized but structurally valid session with artifacts on disk."""
    intake = IntakeRecord(
        mode="consultation",
        mechanism_text=f"mech-{rng.integers(1000)}",
        mechanism_category=rng.choice(["scald", "flame", "contact"]),
        burn_site=rng.choice(["arm", "leg", "torso"]),
        circumferential=bool(rng.integers(2)),
        weight_kg=float(rng.uniform(40, 120)),
        history={"notes": f"n{rng.integers(100)}"},
    )
    session = store.create_session(patient, intake, fixed_clock())
    n_views = int(rng.integers(0, 4))
    for i in range(n_views):
        data = rng.integers(0, 255, size=rng.integers(16, 64)).astype(np.uint8).tobytes()
        ref = store.add_artifact(session, "image", f"view{i}.png", data, subdir="images")
        session.views.append(
            CameraViewRecord(
                view_id=f"v{i}",
                image=ref,
                width=int(rng.integers(100, 2000)),
                height=int(rng.integers(100, 2000)),
                intrinsics=[500.0, 500.0, 320.0, 240.0, 0.0] if rng.integers(2) else None,
            )
        )
    if rng.integers(2):
        mask_ref = store.add_artifact(session, "mask", "m0.png", b"maskdata", subdir="masks")
        session.masks.append(
            MaskRecord(mask_id="m0", view_id="v0" if n_views else "vx", artifact=mask_ref)
        )
    if rng.integers(2):
        mesh_ref = store.add_artifact(session, "mesh", "mesh.ply", b"plybytes")
        session.reconstruction = MeshRecord(
            artifact=mesh_ref, units="cm", n_vertices=10, n_faces=12
        )
        session.metrics = BurnMetrics(
            area_cm2=float(rng.uniform(0, 400)),
            perimeter_cm=float(rng.uniform(0, 80)),
            d_max_mm=float(rng.uniform(0, 9)),
            d_avg_mm=float(rng.uniform(0, 5)),
            volume_proxy_cm3=float(rng.uniform(0, 60)),
            tbsa_percent=float(rng.uniform(0, 30)) if rng.integers(2) else None,
            computed_at=fixed_clock("2026-03-01T10:05:00Z")(),
        )
    if rng.integers(2):
        session.confidence = ConfidenceIndicators(
            n_images=n_views,
            inlier_ratio=float(rng.uniform(0, 1)),
            mean_reprojection_error=float(rng.uniform(0, 3)),
            coverage=float(rng.uniform(0, 1)),
        ).with_score()
    if rng.integers(2):
        session.fluids = FluidPlan(
            weight_kg=70.0,
            tbsa_percent=20.0,
            coefficient_ml_per_kg_percent=4.0,
            total_ml=5600.0,
            first8h_ml=2800.0,
            next16h_ml=2800.0,
            rate_first8h_ml_per_h=350.0,
            rate_next16h_ml_per_h=175.0,
        )
    if rng.integers(2):
        session.scale_ref = ScaleReference(
            view_a="v0",
            view_b="v1",
            point1_pixels=[[10.0, 20.0], [12.0, 22.0]],
            point2_pixels=[[110.0, 20.0], [113.0, 21.0]],
            known_distance_cm=10.0,
            scale_factor=float(rng.uniform(0.5, 5)),
            model_distance=2.0,
        )
    return session


class TestCreateSession:
    def test_minimal_intake_empty_views(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        assert session.views == []
        assert session.masks == []
        assert session.captured_at == fixed_clock()()

    def test_two_sessions_distinct_ids(self, store, patient, consultation_intake):
        s1 = store.create_session(patient, consultation_intake, fixed_clock())
        s2 = store.create_session(patient, consultation_intake, fixed_clock())
        assert s1.session_id != s2.session_id

    def test_unknown_patient_not_found(self, store, consultation_intake):
        with pytest.raises(NotFoundError):
            store.create_session("ghost", consultation_intake, fixed_clock())


class TestPersistLoad:
    def test_round_trip_fully_populated(self, store, patient):
        rng = np.random.default_rng(1)
        session = make_random_session(store, patient, rng)
        store.persist_session(session)
        loaded = store.load_session(session.session_id)
        assert loaded == session

    def test_manifest_contains_metrics_block(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        session.metrics = BurnMetrics(
            area_cm2=314.16,
            perimeter_cm=10.0,
            d_max_mm=2.0,
            d_avg_mm=1.0,
            volume_proxy_cm3=5.0,
            computed_at=fixed_clock()(),
        )
        path = store.persist_session(session)
        raw = json.loads(path.read_text())
        assert raw["metrics"]["area_cm2"] == 314.16

    def test_two_persists_two_manifest_versions(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        p1 = store.persist_session(session)
        session.intake.secondary_findings = "updated"
        p2 = store.persist_session(session)
        sdir = p1.parent
        manifests = sorted(f.name for f in sdir.glob("manifest.v*.json"))
        assert manifests == ["manifest.v1.json", "manifest.v2.json"]
        assert p2.name == "manifest.v2.json"
        # latest wins on load
        assert store.load_session(session.session_id).intake.secondary_findings == "updated"

    def test_missing_artifact_integrity_error(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        session.masks.append(
            MaskRecord(
                mask_id="m",
                view_id="v",
                artifact=ArtifactRef(relpath="masks/gone.png", sha256="0" * 64, kind="mask"),
            )
        )
        with pytest.raises(IntegrityError):
            store.persist_session(session)

    def test_unsupported_schema_version(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        path = store.persist_session(session)
        raw = json.loads(path.read_text())
        raw["schema_version"] = 999
        next_path = path.parent / "manifest.v2.json"
        next_path.write_text(json.dumps(raw))
        with pytest.raises(VersionError):
            store.load_session(session.session_id)

    def test_truncated_manifest_parse_error_names_file(
        self, store, patient, consultation_intake
    ):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        path = store.persist_session(session)
        text = path.read_text()
        truncated = path.parent / "manifest.v2.json"
        truncated.write_text(text[: len(text) // 2])
        with pytest.raises(ManifestParseError) as err:
            store.load_session(session.session_id)
        assert "manifest.v2.json" in str(err.value)

    def test_unknown_session_not_found(self, store, patient):
        with pytest.raises(NotFoundError):
            store.load_session("nope")

    def test_hash_verification_detects_tamper(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        ref = store.add_artifact(session, "mask", "m.png", b"original", subdir="masks")
        session.masks.append(MaskRecord(mask_id="m", view_id="v", artifact=ref))
        store.persist_session(session)
        store.artifact_path(session, ref).write_bytes(b"tampered!")
        with pytest.raises(IntegrityError):
            store.load_session(session.session_id, verify_hashes=True)

    def test_artifact_path_cannot_escape_session(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        with pytest.raises(IntegrityError):
            store.add_artifact(session, "image", "../../escape.png", b"x")
        session.masks.append(
            MaskRecord(
                mask_id="m",
                view_id="v",
                artifact=ArtifactRef(relpath="../patient.json", sha256="0" * 64, kind="mask"),
            )
        )
        with pytest.raises(IntegrityError):
            store.persist_session(session)


class TestRoundTripProperty:
    def test_randomized_sessions_round_trip(self, store, patient):
        rng = np.random.default_rng(2024)
        for _ in range(25):
            session = make_random_session(store, patient, rng)
            store.persist_session(session)
            assert store.load_session(session.session_id) == session

    def test_timeline_sorted_by_captured_at(self, store, patient, consultation_intake):
        stamps = ["2026-03-05T10:00:00Z", "2026-03-01T10:00:00Z", "2026-03-03T10:00:00Z"]
        ids = []
        for ts in stamps:
            s = store.create_session(patient, consultation_intake, fixed_clock(ts))
            store.persist_session(s)
            ids.append(s.session_id)
        listed = store.list_sessions(patient.patient_id)
        captured = [s.captured_at for s in listed]
        assert captured == sorted(captured)
        assert listed[0].session_id == ids[1]


class TestPatientRecord:
    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError):
            PatientRecord(patient_id="x", created_at=fixed_clock()(), weight_kg=-1)

    def test_duplicate_patient_rejected(self, store, patient):
        with pytest.raises(IntegrityError):
            store.add_patient(patient)

    def test_emergency_intake_requires_abcde(self):
        with pytest.raises(ValidationError):
            IntakeRecord(mode="emergency", abcde={"airway": "patent"})
