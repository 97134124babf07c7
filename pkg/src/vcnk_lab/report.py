"""Structured audit records with deterministic JSON rendering."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

VERIFIED = "verified"
CONSISTENT = "consistent"
VIOLATED = "violated"
VACUOUS = "vacuous"

FLOAT_DIGITS = 12


def render(value):
    """Make ``value`` JSON-friendly; rationals become ``"p/q"`` strings."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if math.isinf(value):
            return "-inf" if value < 0 else "inf"
        if math.isnan(value):
            return "nan"
        return round(value, FLOAT_DIGITS)
    if isinstance(value, dict):
        return {str(k): render(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [render(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted((render(v) for v in value), key=repr)
    return str(value)


def canonical_json(obj) -> str:
    return json.dumps(render(obj), sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def combine(verdicts) -> str:
    verdicts = list(verdicts)
    if VIOLATED in verdicts:
        return VIOLATED
    if not verdicts or all(v == VACUOUS for v in verdicts):
        return VACUOUS
    if CONSISTENT in verdicts:
        return CONSISTENT
    return VERIFIED


@dataclass
class AuditReport:
    """One inequality check: what was claimed, what was computed, and the outcome.

    A ``violated`` report carries at least one witness that reproduces the failure.
    """

    name: str
    claim: str
    inputs: dict
    quantities: dict = field(default_factory=dict)
    verdict: str = VERIFIED
    witnesses: list = field(default_factory=list)

    @property
    def inputs_digest(self) -> str:
        return digest(self.inputs)

    @property
    def ok(self) -> bool:
        return self.verdict != VIOLATED

    def to_dict(self) -> dict:
        return {
            "audit": self.name,
            "claim": self.claim,
            "inputs_digest": self.inputs_digest,
            "quantities": render(self.quantities),
            "verdict": self.verdict,
            "witnesses": render(self.witnesses),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
