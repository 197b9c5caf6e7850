"""Fluid planning arithmetic, BSA estimation, and recommendation rules."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from burnscope.clinical import (
    DEFAULT_RULESET,
    estimate_bsa_cm2,
    estimate_bsa_m2,
    parkland_plan,
    recommend,
)
from burnscope.errors import IncompleteSessionError, ValidationError
from burnscope.models import BurnMetrics
from conftest import fixed_clock


class TestParklandPlan:
    def test_reference_adult_case(self):
        plan = parkland_plan(70, 40)
        assert plan.total_ml == 11200.0
        assert plan.first8h_ml == 5600.0
        assert plan.next16h_ml == 5600.0
        assert plan.rate_first8h_ml_per_h == 700.0
        assert plan.rate_next16h_ml_per_h == 350.0

    def test_tiny_tbsa_no_special_casing(self):
        plan = parkland_plan(70, 0.0001)
        assert plan.total_ml == pytest.approx(4 * 70 * 0.0001)

    def test_out_of_range_tbsa(self):
        with pytest.raises(ValidationError) as err:
            parkland_plan(70, 150)
        assert "tbsa_percent" in str(err.value)

    def test_out_of_range_weight(self):
        with pytest.raises(ValidationError) as err:
            parkland_plan(0, 20)
        assert "weight_kg" in str(err.value)

    @given(
        weight=st.floats(min_value=1, max_value=400),
        tbsa=st.floats(min_value=0.01, max_value=100),
    )
    @settings(max_examples=80, deadline=None)
    def test_linearity_and_rate_identity(self, weight, tbsa):
        plan = parkland_plan(weight, tbsa)
        if 2 * weight <= 400:
            assert parkland_plan(2 * weight, tbsa).total_ml == 2 * plan.total_ml
        assert plan.rate_first8h_ml_per_h == 2 * plan.rate_next16h_ml_per_h
        assert plan.total_ml == 4 * weight * tbsa
        assert plan.first8h_ml == plan.next16h_ml == plan.total_ml / 2

    def test_coefficient_parameter(self):
        assert parkland_plan(70, 40, coefficient=3).total_ml == 3 * 70 * 40


class TestBsa:
    def test_reference_value(self):
        # sqrt(170 * 70 / 3600) = 1.8181...
        assert estimate_bsa_m2(170, 70) == pytest.approx(1.818, abs=1e-3)

    def test_perfect_square_input(self):
        assert estimate_bsa_m2(36, 1) == pytest.approx(0.1)

    def test_cm2_conversion(self):
        assert estimate_bsa_cm2(36, 1) == pytest.approx(1000.0)

    def test_zero_weight_rejected(self):
        with pytest.raises(ValidationError):
            estimate_bsa_m2(170, 0)


def session_with_tbsa(store, patient, intake, tbsa, d_max_mm=1.0):
    session = store.create_session(patient, intake, fixed_clock())
    session.metrics = BurnMetrics(
        area_cm2=tbsa * 190.0,
        perimeter_cm=12.0,
        d_max_mm=d_max_mm,
        d_avg_mm=d_max_mm / 2,
        volume_proxy_cm3=3.0,
        tbsa_percent=tbsa,
        computed_at=fixed_clock()(),
    )
    return session


class TestRecommend:
    def test_high_tbsa_includes_fluid_plan(self, store, patient, consultation_intake):
        session = session_with_tbsa(store, patient, consultation_intake, 25.0)
        recs = recommend(session)
        fluids = [i for i in recs.items if i.category == "fluids"]
        assert len(fluids) == 1
        # Plan for W=70, A=25: total 7000 mL, 438 mL/h then 219 mL/h
        assert "7000 mL" in fluids[0].text
        assert fluids[0].rule_id == "fluids-resuscitation"

    def test_low_tbsa_only_wound_care_and_follow_up(
        self, store, patient, consultation_intake
    ):
        session = session_with_tbsa(store, patient, consultation_intake, 1.0, d_max_mm=0.5)
        recs = recommend(session)
        categories = sorted({i.category for i in recs.items})
        assert categories == ["follow-up", "wound care"]

    def test_missing_metrics_incomplete(self, store, patient, consultation_intake):
        session = store.create_session(patient, consultation_intake, fixed_clock())
        with pytest.raises(IncompleteSessionError):
            recommend(session)

    def test_circumferential_triggers_referral(self, store, patient, emergency_intake):
        emergency_intake.circumferential = True
        session = session_with_tbsa(store, patient, emergency_intake, 2.0, d_max_mm=0.5)
        recs = recommend(session)
        assert any(i.rule_id == "referral-circumferential" for i in recs.items)

    def test_depth_triggers_referral(self, store, patient, consultation_intake):
        session = session_with_tbsa(store, patient, consultation_intake, 2.0, d_max_mm=6.0)
        recs = recommend(session)
        assert any(i.rule_id == "referral-depth" for i in recs.items)

    def test_deterministic_ordering(self, store, patient, consultation_intake):
        session = session_with_tbsa(store, patient, consultation_intake, 25.0)
        r1 = recommend(session)
        r2 = recommend(session)
        assert r1 == r2

    def test_every_item_cites_existing_rule(self, store, patient, consultation_intake):
        session = session_with_tbsa(store, patient, consultation_intake, 25.0)
        recs = recommend(session)
        known = DEFAULT_RULESET.rule_ids() | {"default-follow-up"}
        assert all(i.rule_id in known for i in recs.items)

    def test_manual_tbsa_fallback(self, store, patient, consultation_intake):
        consultation_intake.tbsa_percent_manual = 20.0
        session = store.create_session(patient, consultation_intake, fixed_clock())
        session.metrics = BurnMetrics(
            area_cm2=0.0,
            perimeter_cm=0.0,
            d_max_mm=0.0,
            d_avg_mm=0.0,
            volume_proxy_cm3=0.0,
            tbsa_percent=None,
            computed_at=fixed_clock()(),
        )
        recs = recommend(session)
        assert any(i.category == "fluids" for i in recs.items)

    def test_ruleset_loaded_from_file(self, tmp_path, store, patient, consultation_intake):
        import json

        from burnscope.clinical import Ruleset

        custom = {
            "constants": {"fluid_threshold": 30.0},
            "rules": [
                {
                    "id": "only-rule",
                    "when": {"field": "tbsa_percent", "op": ">=", "value_from": "fluid_threshold"},
                    "category": "fluids",
                    "severity": "high",
                    "text": "Start fluids.",
                }
            ],
        }
        path = tmp_path / "ruleset.json"
        path.write_text(json.dumps(custom))
        ruleset = Ruleset.from_file(path)
        assert ruleset.fluid_threshold == 30.0

        below = session_with_tbsa(store, patient, consultation_intake, 25.0)
        recs = recommend(below, ruleset)
        # 25 < 30: nothing matches, the default follow-up item appears
        assert [i.rule_id for i in recs.items] == ["default-follow-up"]
        above = session_with_tbsa(store, patient, consultation_intake, 35.0)
        recs = recommend(above, ruleset)
        assert [i.rule_id for i in recs.items] == ["only-rule"]
