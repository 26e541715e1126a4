"""Choosing which tests the assessor repeats physically.

A test is selected when the applicant gave no result, when the assessor
flagged the result as inconsistent, or when it lands in the keyed-hash
spot-check sample. Too many missing results fail the assessment outright.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import IO, Any

from .catalog import Catalog
from .errors import SchemaError, UnknownTestId, ValidationError
from .results import ApplicantReport

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def spot_check_key(seed: int, test_id: str) -> int:
    return fnv1a_64(f"{seed}:{test_id}".encode("utf-8"))


class Reason(str, Enum):
    MISSING_RESULT = "missing_result"
    INCONSISTENT = "inconsistent"
    SPOT_CHECK = "spot_check"
    NOT_SELECTED = "not_selected"


@dataclass(frozen=True)
class SelectionDecision:
    test_id: str
    selected: bool
    reason: Reason

    def __post_init__(self) -> None:
        if self.selected != (self.reason is not Reason.NOT_SELECTED):
            raise ValidationError("selected must agree with reason", test_id=self.test_id, field="reason")


@dataclass(frozen=True)
class AutoFail:
    reason: str
    missing_fraction: float

    def __str__(self) -> str:
        return f"auto-fail ({self.reason}): {self.missing_fraction:.3f} of tests lack applicant results"


MISSING_RESULTS_OVERRUN = "MissingResultsOverrun"


@dataclass(frozen=True)
class SelectionPolicy:
    spot_check_fraction: float = 0.0
    missing_fail_fraction: float = 0.10
    inconsistency_flags: frozenset[str] = field(default_factory=frozenset)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.spot_check_fraction <= 1.0:
            raise ValidationError("spot_check_fraction must lie in [0, 1]", field="spot_check_fraction")
        if not 0.0 < self.missing_fail_fraction <= 1.0:
            raise ValidationError("missing_fail_fraction must lie in (0, 1]", field="missing_fail_fraction")
        if not 0 <= self.seed <= _MASK64:
            raise ValidationError("seed must be a 64-bit unsigned integer", field="seed")
        object.__setattr__(self, "inconsistency_flags", frozenset(self.inconsistency_flags))

    def to_dict(self) -> dict[str, Any]:
        return {
            "spot_check_fraction": self.spot_check_fraction,
            "missing_fail_fraction": self.missing_fail_fraction,
            "inconsistency_flags": sorted(self.inconsistency_flags),
            "seed": str(self.seed),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SelectionPolicy":
        if not isinstance(doc, Mapping):
            raise SchemaError("policy must be an object")
        seed = doc.get("seed", "0")
        if not isinstance(seed, str) or not seed.isdigit():
            raise SchemaError("policy seed must be a decimal string")
        flags = doc.get("inconsistency_flags", [])
        if not isinstance(flags, list):
            raise SchemaError("inconsistency_flags must be a list")
        return cls(
            spot_check_fraction=float(doc.get("spot_check_fraction", 0.0)),
            missing_fail_fraction=float(doc.get("missing_fail_fraction", 0.10)),
            inconsistency_flags=frozenset(str(f) for f in flags),
            seed=int(seed),
        )


def load_policy(source: bytes | str | IO) -> SelectionPolicy:
    if hasattr(source, "read"):
        source = source.read()
    try:
        return SelectionPolicy.from_dict(json.loads(source))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"policy is not valid JSON: {exc}") from exc


def _check_ids(catalog: Catalog, ids: Iterable[str]) -> None:
    known = set(catalog.ids)
    unknown = sorted(set(ids) - known)
    if unknown:
        raise UnknownTestId(f"report mentions tests not in the catalog: {', '.join(unknown)}")


def missing_fraction(catalog: Catalog, report: ApplicantReport) -> float:
    missing = sum(1 for t in catalog.ids if report.get(t) is None)
    return missing / len(catalog.ids)


def spot_check_size(fraction: float, n_tests: int) -> int:
    # Decimal avoids ceil(0.1 * 30) == 4 from binary rounding.
    return math.ceil(Decimal(repr(fraction)) * n_tests)


def spot_check_sample(candidates: Iterable[str], seed: int, size: int) -> list[str]:
    ranked = sorted(candidates, key=lambda tid: (spot_check_key(seed, tid), tid))
    return ranked[:size]


def select_tests(
    catalog: Catalog, report: ApplicantReport, policy: SelectionPolicy
) -> list[SelectionDecision] | AutoFail:
    _check_ids(catalog, report.entries)
    _check_ids(catalog, policy.inconsistency_flags)
    frac = missing_fraction(catalog, report)
    if frac > policy.missing_fail_fraction:
        return AutoFail(MISSING_RESULTS_OVERRUN, frac)

    reasons: dict[str, Reason] = {}
    for tid in catalog.ids:
        if report.get(tid) is None:
            reasons[tid] = Reason.MISSING_RESULT
        elif tid in policy.inconsistency_flags:
            reasons[tid] = Reason.INCONSISTENT
    pool = [tid for tid in catalog.ids if tid not in reasons]
    size = spot_check_size(policy.spot_check_fraction, len(catalog.ids))
    for tid in spot_check_sample(pool, policy.seed, size):
        reasons[tid] = Reason.SPOT_CHECK
    return [
        SelectionDecision(tid, tid in reasons, reasons.get(tid, Reason.NOT_SELECTED)) for tid in catalog.ids
    ]


def selected_ids(decisions: Iterable[SelectionDecision]) -> list[str]:
    return [d.test_id for d in decisions if d.selected]
