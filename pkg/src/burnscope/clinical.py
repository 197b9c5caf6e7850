"""Fluid planning, body-surface-area estimation, and rule-based recommendations.

All outputs here are advisory decision support. The recommendation
ruleset is data, not code: a JSON document of predicate rules with
conservative, clearly non-authoritative default thresholds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from .errors import IncompleteSessionError, ValidationError
from .models import AssessmentSession, FluidPlan

MAX_WEIGHT_KG = 400.0


def parkland_plan(
    weight_kg: float, tbsa_percent: float, coefficient: float = 4.0
) -> FluidPlan:
    """24 h fluid plan: total = coefficient x weight x %TBSA, half in 8 h, half in 16 h.

    The coefficient defaults to the adult 4 mL/kg/% figure; pediatric
    practice varies, so it is a parameter rather than a branch.
    """
    problems = []
    if not (0 < weight_kg <= MAX_WEIGHT_KG):
        problems.append(f"weight_kg={weight_kg!r} outside (0, {MAX_WEIGHT_KG}]")
    if not (0 < tbsa_percent <= 100):
        problems.append(f"tbsa_percent={tbsa_percent!r} outside (0, 100]")
    if not coefficient > 0:
        problems.append(f"coefficient={coefficient!r} must be positive")
    if problems:
        raise ValidationError("; ".join(problems))

    total = coefficient * weight_kg * tbsa_percent
    half = total / 2.0
    return FluidPlan(
        weight_kg=weight_kg,
        tbsa_percent=tbsa_percent,
        coefficient_ml_per_kg_percent=coefficient,
        total_ml=total,
        first8h_ml=half,
        next16h_ml=half,
        rate_first8h_ml_per_h=half / 8.0,
        rate_next16h_ml_per_h=half / 16.0,
    )


def estimate_bsa_m2(height_cm: float, weight_kg: float) -> float:
    """Body surface area in m^2 via sqrt(height x weight / 3600)."""
    if height_cm <= 0 or weight_kg <= 0:
        raise ValidationError("height_cm and weight_kg must be positive")
    return math.sqrt(height_cm * weight_kg / 3600.0)


def estimate_bsa_cm2(height_cm: float, weight_kg: float) -> float:
    return estimate_bsa_m2(height_cm, weight_kg) * 1e4


# ----------------------------------------------------------------------
# rule-based recommendations

RECOMMENDATION_CATEGORIES = (
    "wound care",
    "pain",
    "fluids",
    "infection",
    "tetanus",
    "follow-up",
    "referral",
)


@dataclass(frozen=True)
class RecommendationItem:
    category: str
    text: str
    rule_id: str
    severity: str  # info | moderate | high

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "text": self.text,
            "rule_id": self.rule_id,
            "severity": self.severity,
        }


@dataclass(frozen=True)
class RecommendationSet:
    items: tuple[RecommendationItem, ...]
    disclaimer: str = (
        "Advisory decision support only; does not replace clinician judgement."
    )

    def to_dict(self) -> dict:
        return {
            "items": [i.to_dict() for i in self.items],
            "disclaimer": self.disclaimer,
        }


@dataclass
class Ruleset:
    """Ordered predicate rules over session-derived fields plus shared constants."""

    rules: list
    constants: dict = field(default_factory=dict)

    @property
    def fluid_threshold(self) -> float:
        return self.constants.get("fluid_threshold", 15.0)

    def rule_ids(self) -> set:
        return {r["id"] for r in self.rules}

    @classmethod
    def from_dict(cls, raw: dict) -> "Ruleset":
        return cls(rules=list(raw["rules"]), constants=dict(raw.get("constants", {})))

    @classmethod
    def from_file(cls, path) -> "Ruleset":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"rules": self.rules, "constants": self.constants}


# Conservative defaults, flagged non-authoritative: referral at TBSA >= 10 %,
# any circumferential burn, or depth proxy >= 5 mm; fluid planning from 15 %.
DEFAULT_RULESET = Ruleset(
    constants={"fluid_threshold": 15.0},
    rules=[
        {
            "id": "wound-care-basic",
            "when": {"field": "tbsa_percent", "op": ">", "value": 0},
            "category": "wound care",
            "severity": "info",
            "text": "Cleanse with lukewarm water, debride loose tissue, apply non-adherent dressing; reassess at each change.",
        },
        {
            "id": "pain-moderate",
            "when": {"field": "tbsa_percent", "op": ">=", "value": 5},
            "category": "pain",
            "severity": "moderate",
            "text": "Provide scheduled analgesia and reassess pain scores before and after dressing changes.",
        },
        {
            "id": "fluids-resuscitation",
            "when": {"field": "tbsa_percent", "op": ">=", "value_from": "fluid_threshold"},
            "category": "fluids",
            "severity": "high",
            "text": "Initiate crystalloid resuscitation per the attached 24 h plan; titrate to urine output.",
        },
        {
            "id": "infection-monitoring",
            "when": {
                "any": [
                    {"field": "tbsa_percent", "op": ">=", "value": 5},
                    {"field": "d_max_mm", "op": ">=", "value": 3},
                ]
            },
            "category": "infection",
            "severity": "moderate",
            "text": "Monitor for cellulitis, odour, and systemic signs; culture if deterioration.",
        },
        {
            "id": "tetanus-check",
            "when": {
                "any": [
                    {"field": "tbsa_percent", "op": ">=", "value": 5},
                    {
                        "field": "mechanism_category",
                        "op": "in",
                        "value": ["flame", "contact", "chemical", "electrical", "friction"],
                    },
                ]
            },
            "category": "tetanus",
            "severity": "info",
            "text": "Verify tetanus immunization status; give prophylaxis if not current.",
        },
        {
            "id": "referral-tbsa",
            "when": {"field": "tbsa_percent", "op": ">=", "value": 10},
            "category": "referral",
            "severity": "high",
            "text": "Burn extent meets referral criteria; discuss with the regional burn service.",
        },
        {
            "id": "referral-circumferential",
            "when": {"field": "circumferential", "op": "truthy"},
            "category": "referral",
            "severity": "high",
            "text": "Circumferential burn: assess distal perfusion urgently and refer for possible escharotomy.",
        },
        {
            "id": "referral-depth",
            "when": {"field": "d_max_mm", "op": ">=", "value": 5},
            "category": "referral",
            "severity": "high",
            "text": "Depth proxy suggests a deep injury; refer for surgical assessment.",
        },
        {
            "id": "follow-up-routine",
            "when": {"always": True},
            "category": "follow-up",
            "severity": "info",
            "text": "Arrange review within 48-72 h with repeat imaging to track healing.",
        },
    ],
)

_FALLBACK_ITEM = RecommendationItem(
    category="follow-up",
    text="No rules matched; arrange routine follow-up review.",
    rule_id="default-follow-up",
    severity="info",
)

_OPS = {
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
    "in": lambda a, b: a in b,
}


def _eval_predicate(pred: dict, fields: dict, constants: dict) -> bool:
    if pred.get("always"):
        return True
    if "all" in pred:
        return all(_eval_predicate(p, fields, constants) for p in pred["all"])
    if "any" in pred:
        return any(_eval_predicate(p, fields, constants) for p in pred["any"])
    value = fields.get(pred["field"])
    if pred.get("op") == "truthy":
        return bool(value)
    if value is None:
        return False
    expected = (
        constants[pred["value_from"]] if "value_from" in pred else pred["value"]
    )
    return _OPS[pred["op"]](value, expected)


def session_rule_fields(session: AssessmentSession) -> dict:
    """Flatten the metric and intake fields the rule predicates may reference."""
    m = session.metrics
    intake = session.intake
    tbsa = m.tbsa_percent if m and m.tbsa_percent is not None else None
    if tbsa is None:
        tbsa = intake.tbsa_percent_manual
    return {
        "tbsa_percent": tbsa,
        "area_cm2": m.area_cm2 if m else None,
        "d_max_mm": m.d_max_mm if m else None,
        "volume_proxy_cm3": m.volume_proxy_cm3 if m else None,
        "circumferential": intake.circumferential,
        "mechanism_category": intake.mechanism_category,
        "burn_site": intake.burn_site,
        "mode": intake.mode,
        "age_years": intake.age_years,
    }


def recommend(
    session: AssessmentSession,
    ruleset: Ruleset = DEFAULT_RULESET,
    coefficient: float = 4.0,
) -> RecommendationSet:
    """Evaluate the ruleset over a session with metrics; order follows the ruleset.

    Matched rules in the ``fluids`` category embed the computed 24 h
    plan in their text when weight and TBSA are available.
    """
    if session.metrics is None:
        raise IncompleteSessionError(
            f"session {session.session_id} has no metrics; run analysis first"
        )
    fields = session_rule_fields(session)
    items: list[RecommendationItem] = []
    for rule in ruleset.rules:
        if not _eval_predicate(rule["when"], fields, ruleset.constants):
            continue
        text = rule["text"]
        if rule["category"] == "fluids":
            weight = session.intake.weight_kg
            tbsa = fields["tbsa_percent"]
            if weight and tbsa:
                plan = parkland_plan(weight, tbsa, coefficient)
                text += (
                    f" Plan: {plan.total_ml:.0f} mL over 24 h "
                    f"({plan.rate_first8h_ml_per_h:.0f} mL/h for 8 h, then "
                    f"{plan.rate_next16h_ml_per_h:.0f} mL/h for 16 h)."
                )
            else:
                text += " Record patient weight to compute the volume plan."
        items.append(
            RecommendationItem(
                category=rule["category"],
                text=text,
                rule_id=rule["id"],
                severity=rule["severity"],
            )
        )
    if not items:
        items.append(_FALLBACK_ITEM)
    return RecommendationSet(items=tuple(items))
