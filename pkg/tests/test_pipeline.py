"""Store-level pipeline runs: the mesh-direct route and healing timelines."""

import numpy as np
import pytest

from burnscope.config import ServiceConfig
from burnscope.mesh import LabeledMesh
from burnscope.models import MeshRecord
from burnscope.pipeline import PipelineContext
from burnscope.synthetic import crater_mesh
from conftest import fixed_clock


def ingest_mesh(store, session, mesh: LabeledMesh):
    ref = store.add_artifact(session, "mesh", "mesh_ingested.ply", mesh.to_ply_bytes())
    session.reconstruction = MeshRecord(
        artifact=ref, units=mesh.units, n_vertices=mesh.n_vertices, n_faces=mesh.n_faces
    )
    store.persist_session(session)


def shrunken_crater(scale_r: float) -> LabeledMesh:
    return crater_mesh(
        crater_radius=2.0 * scale_r,
        outer_radius=4.0,
        depth=0.5 * scale_r,
        n_rings=24,
        n_theta=36,
    )


class TestMeshDirectPipeline:
    def test_metrics_and_report_from_ingested_mesh(
        self, store, patient, consultation_intake
    ):
        ctx = PipelineContext(store=store, config=ServiceConfig(), clock=fixed_clock())
        session = store.create_session(patient, consultation_intake, fixed_clock())
        ingest_mesh(store, session, shrunken_crater(1.0))
        result = ctx.run_all(session.session_id)
        assert result.metrics is not None
        assert result.metrics.area_cm2 > 0
        assert result.metrics.d_max_mm == pytest.approx(5.0, abs=0.15)
        assert result.metrics.tbsa_percent is not None  # patient has height + weight
        assert result.fluids is not None
        assert result.report is not None
        # report artifacts exist and hash matches
        loaded = store.load_session(session.session_id, verify_hashes=True)
        assert loaded.report.content_hash == result.report.content_hash

    def test_healing_timeline_and_alignment(self, store, patient, consultation_intake):
        ctx = PipelineContext(store=store, config=ServiceConfig(), clock=fixed_clock())
        stamps = ["2026-03-01T10:00:00Z", "2026-03-08T10:00:00Z", "2026-03-15T10:00:00Z"]
        shrink = [1.0, 0.85, 0.7]
        ids = []
        for ts, s in zip(stamps, shrink):
            session = store.create_session(patient, consultation_intake, fixed_clock(ts))
            mesh = shrunken_crater(s)
            # later sessions arrive rigidly displaced (patient repositioned)
            if s != 1.0:
                angle = 0.15
                rot = np.array(
                    [
                        [np.cos(angle), -np.sin(angle), 0],
                        [np.sin(angle), np.cos(angle), 0],
                        [0, 0, 1],
                    ]
                )
                mesh = mesh.transformed(rot, np.array([0.4, -0.2, 0.1]))
            ingest_mesh(store, session, mesh)
            ctx.run_all(session.session_id)
            ids.append(session.session_id)

        series = ctx.patient_series(patient.patient_id)
        assert series is not None
        assert len(series.points) == 3
        areas = [p.metrics.area_cm2 for p in series.points]
        assert areas[0] > areas[1] > areas[2]
        assert series.points[0].day == 0.0
        assert series.points[1].day == pytest.approx(7.0)
        assert series.points[2].day == pytest.approx(14.0)
        assert series.healing_rate_cm2_per_day > 0
        assert series.projected_recovery_days is not None

        # later sessions carry an alignment record against the baseline
        second = store.load_session(ids[1])
        assert second.alignment is not None
        assert second.alignment.baseline_session_id == ids[0]
        rotation = np.array(second.alignment.rotation).reshape(3, 3)
        assert np.abs(rotation.T @ rotation - np.eye(3)).max() < 1e-9
        assert second.alignment.rms < 0.2  # healthy ring anchors the fit

    def test_report_versions_increment(self, store, patient, consultation_intake):
        ctx = PipelineContext(store=store, config=ServiceConfig(), clock=fixed_clock())
        session = store.create_session(patient, consultation_intake, fixed_clock())
        ingest_mesh(store, session, shrunken_crater(1.0))
        result = ctx.run_all(session.session_id)
        assert result.report.version == 1
        result = ctx.stage_report(result)
        assert result.report.version == 2
        sdir = store.session_dir(patient.patient_id, session.session_id)
        assert (sdir / "report.v1.json").exists()
        assert (sdir / "report.v2.json").exists()
