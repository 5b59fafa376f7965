"""Evaluation report container and its fixed JSON key schema."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import jsonschema

from ..errors import SchemaError

INTERPOLATION = "interpolation"
EXTRAPOLATION = "extrapolation"

_num = {"type": "number"}
_count = {"type": "integer", "minimum": 1}

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["scenario", "variant", "fidelity", "coherence", "controllability", "counts", "config"],
    "additionalProperties": False,
    "properties": {
        "scenario": {"enum": [INTERPOLATION, EXTRAPOLATION]},
        "variant": {"type": "string"},
        "fidelity": {
            "type": "object", "additionalProperties": False,
            "required": ["ed_mean", "dtw_mean"],
            "properties": {"ed_mean": _num, "dtw_mean": _num},
        },
        "coherence": {
            "type": "object", "additionalProperties": False,
            "required": ["cfid", "acd_mean"],
            "properties": {"cfid": _num, "acd_mean": _num},
        },
        "controllability": {
            "type": "object", "additionalProperties": False,
            "required": ["acc"],
            "properties": {"acc": _num, "weighted_f1": _num, "auc": _num},
        },
        "counts": {
            "type": "object",
            "required": ["pairs"],
            "additionalProperties": _count,
            "properties": {"pairs": _count},
        },
        "config": {"type": "object"},
    },
    "allOf": [
        {"if": {"properties": {"scenario": {"const": INTERPOLATION}}},
         "then": {"properties": {"controllability": {"required": ["acc", "weighted_f1"], "not": {"required": ["auc"]}}}}},
        {"if": {"properties": {"scenario": {"const": EXTRAPOLATION}}},
         "then": {"properties": {"controllability": {"required": ["acc", "auc"], "not": {"required": ["weighted_f1"]}}}}},
    ],
}


@dataclass
class EvalReport:
    scenario: str
    variant: str
    fidelity: dict
    coherence: dict
    controllability: dict
    counts: dict
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "scenario": self.scenario, "variant": self.variant,
            "fidelity": dict(self.fidelity), "coherence": dict(self.coherence),
            "controllability": dict(self.controllability), "counts": dict(self.counts),
            "config": dict(self.config),
        }

    @classmethod
    def from_dict(cls, d):
        validate_report(d)
        return cls(**{k: d[k] for k in REPORT_SCHEMA["required"]})

    def flat(self):
        """One-level mapping of the metric blocks, handy for CSV rows."""
        out = {"scenario": self.scenario, "variant": self.variant}
        for block in ("fidelity", "coherence", "controllability", "counts"):
            out.update(getattr(self, block))
        return out


def validate_report(d):
    """Schema check plus the finiteness invariant on every metric."""
    try:
        jsonschema.validate(d, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"invalid report: {exc.message}") from None
    for block in ("fidelity", "coherence", "controllability"):
        for k, v in d[block].items():
            if not math.isfinite(v):
                raise SchemaError(f"report metric {block}.{k} is not finite")
    return d
