"""Report compilation: determinism, verbatim values, format consistency."""

import re

import pytest

from burnscope.clinical import recommend
from burnscope.errors import IntegrityError
from burnscope.longitudinal import compute_deltas
from burnscope.models import BurnMetrics, MeshRecord
from burnscope.quality import ConfidenceIndicators
from burnscope.report import flatten_fields, generate_report, render_value
from conftest import fixed_clock


def analyzed_session(store, patient, intake, area=314.16):
    session = store.create_session(patient, intake, fixed_clock())
    mesh_ref = store.add_artifact(session, "mesh", "mesh.ply", b"ply stub")
    session.reconstruction = MeshRecord(artifact=mesh_ref, units="cm", n_vertices=9, n_faces=8)
    session.metrics = BurnMetrics(
        area_cm2=area,
        perimeter_cm=62.83,
        d_max_mm=4.2,
        d_avg_mm=2.1,
        volume_proxy_cm3=33.1,
        tbsa_percent=1.75,
        computed_at=fixed_clock("2026-03-01T10:05:00Z")(),
    )
    session.confidence = ConfidenceIndicators(
        n_images=8, inlier_ratio=0.91, mean_reprojection_error=0.4, coverage=0.88
    ).with_score()
    store.persist_session(session)
    return session


class TestGenerateReport:
    def test_contains_exact_metric_value(self, store, patient, consultation_intake):
        session = analyzed_session(store, patient, consultation_intake)
        doc = generate_report(session, patient=patient, clock=fixed_clock())
        assert doc.body["metrics"]["area_cm2"] == 314.16
        assert "314.16" in doc.to_html()

    def test_deterministic_hash_under_fixed_clock(self, store, patient, consultation_intake):
        session = analyzed_session(store, patient, consultation_intake)
        recs = recommend(session)
        doc1 = generate_report(
            session, patient=patient, recommendations=recs, clock=fixed_clock()
        )
        doc2 = generate_report(
            session, patient=patient, recommendations=recs, clock=fixed_clock()
        )
        assert doc1.content_hash == doc2.content_hash
        assert doc1.to_json() == doc2.to_json()

    def test_hash_excludes_generated_at(self, store, patient, consultation_intake):
        session = analyzed_session(store, patient, consultation_intake)
        doc1 = generate_report(session, patient=patient, clock=fixed_clock("2026-03-01T10:00:00Z"))
        doc2 = generate_report(session, patient=patient, clock=fixed_clock("2026-04-01T08:30:00Z"))
        assert doc1.generated_at != doc2.generated_at
        assert doc1.content_hash == doc2.content_hash

    def test_empty_session_renders_not_performed(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        store.persist_session(session)
        doc = generate_report(session, patient=patient, clock=fixed_clock())
        assert doc.body["metrics"] == "not performed"
        assert doc.body["reconstruction"] == "not performed"
        assert doc.body["longitudinal"] == "not performed"
        assert "not performed" in doc.to_html()

    def test_metrics_without_mesh_is_integrity_error(
        self, store, patient, consultation_intake
    ):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        session.metrics = BurnMetrics(
            area_cm2=1.0,
            perimeter_cm=1.0,
            d_max_mm=0.0,
            d_avg_mm=0.0,
            volume_proxy_cm3=0.0,
            computed_at=fixed_clock()(),
        )
        with pytest.raises(IntegrityError):
            generate_report(session, patient=patient, clock=fixed_clock())

    def test_disclaimer_always_present(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        doc = generate_report(session, patient=patient, clock=fixed_clock())
        assert "decision support" in doc.body["disclaimers"]
        assert "disclaimer" in doc.to_html()

    def test_longitudinal_section_embeds_series(self, store, patient, consultation_intake):
        session = analyzed_session(store, patient, consultation_intake)
        series = compute_deltas(
            [(0, session.metrics), (7, session.metrics), (14, session.metrics)]
        )
        doc = generate_report(session, patient=patient, series=series, clock=fixed_clock())
        assert len(doc.body["longitudinal"]["points"]) == 3

    def test_html_and_body_share_field_values(self, store, patient, consultation_intake):
        session = analyzed_session(store, patient, consultation_intake)
        recs = recommend(session)
        doc = generate_report(
            session, patient=patient, recommendations=recs, clock=fixed_clock()
        )
        html_text = doc.to_html()
        cells = re.findall(r"<td data-field=\"([^\"]*)\">(.*?)</td>", html_text, re.S)
        rendered = {}
        for field, value in cells:
            rendered[field] = value
        import html as html_mod

        for section, content in doc.body.items():
            if section == "disclaimers":
                continue
            for field, value in flatten_fields(content):
                assert field in rendered, f"missing field {field} in HTML"
                assert html_mod.unescape(rendered[field]) == render_value(value)

    def test_report_generation_does_not_touch_store(
        self, store, patient, consultation_intake, tmp_path
    ):
        session = analyzed_session(store, patient, consultation_intake)
        sdir = store.session_dir(patient.patient_id, session.session_id)
        before = sorted(p.relative_to(sdir).as_posix() for p in sdir.rglob("*"))
        generate_report(session, patient=patient, clock=fixed_clock())
        after = sorted(p.relative_to(sdir).as_posix() for p in sdir.rglob("*"))
        assert before == after
