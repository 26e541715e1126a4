"""Plain-dict encodings of engine values, shared by session and report files."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from typing import Any

from .catalog import CoverageReport, combination, combination_key
from .rating import Rating
from .selection import AutoFail, Reason, SelectionDecision
from .verdict import Advice, Cause, DemeritLedger, Fidelity, Finding, FindingKind, Outcome, TestAssessment


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def digest(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj)).hexdigest()


def _rating(r: Rating | None) -> str | None:
    return None if r is None else r.label


def _parse_rating(s: str | None) -> Rating | None:
    return None if s is None else Rating.parse(s)


def coverage_to_dict(c: CoverageReport) -> dict[str, Any]:
    enc = lambda combos: [dict(combination_key(x)) for x in sorted(combos, key=combination_key)]  # noqa: E731
    return {"verdict": c.verdict, "covered": enc(c.covered), "missing": enc(c.missing)}


def coverage_from_dict(d: Mapping[str, Any]) -> CoverageReport:
    return CoverageReport(
        frozenset(combination(x) for x in d["covered"]), frozenset(combination(x) for x in d["missing"])
    )


def selection_to_dict(sel: list[SelectionDecision] | AutoFail) -> dict[str, Any]:
    if isinstance(sel, AutoFail):
        return {"auto_fail": {"reason": sel.reason, "missing_fraction": sel.missing_fraction}}
    return {
        "decisions": [{"test_id": d.test_id, "selected": d.selected, "reason": d.reason.value} for d in sel]
    }


def selection_from_dict(d: Mapping[str, Any]) -> list[SelectionDecision] | AutoFail:
    if "auto_fail" in d:
        return AutoFail(d["auto_fail"]["reason"], float(d["auto_fail"]["missing_fraction"]))
    return [SelectionDecision(x["test_id"], bool(x["selected"]), Reason(x["reason"])) for x in d["decisions"]]


def finding_to_dict(f: Finding) -> dict[str, Any]:
    return {
        "kind": f.kind.value,
        "cause": f.cause.value,
        "severity": f.severity,
        "note": f.note,
        "merged_causes": [c.value for c in f.merged_causes],
    }


def finding_from_dict(d: Mapping[str, Any]) -> Finding:
    return Finding(
        FindingKind(d["kind"]),
        Cause(d["cause"]),
        d["severity"],
        d["note"],
        tuple(Cause(c) for c in d.get("merged_causes", ())),
    )


def assessment_to_dict(a: TestAssessment) -> dict[str, Any]:
    return {
        "test_id": a.test_id,
        "applicant_rating": _rating(a.applicant_rating),
        "assessor_rating": _rating(a.assessor_rating),
        "effective_rating": a.effective_rating.label,
        "fidelity": a.fidelity.value,
        "passed": a.passed,
        "findings": [finding_to_dict(f) for f in a.findings],
    }


def assessment_from_dict(d: Mapping[str, Any]) -> TestAssessment:
    return TestAssessment(
        d["test_id"],
        _parse_rating(d["applicant_rating"]),
        _parse_rating(d["assessor_rating"]),
        Rating.parse(d["effective_rating"]),
        Fidelity(d["fidelity"]),
        tuple(finding_from_dict(f) for f in d["findings"]),
    )


def ledger_to_dict(l: DemeritLedger) -> dict[str, Any]:  # noqa: E741
    return {
        "starting_points": l.starting_points,
        "deductions": [[tid, s] for tid, s in l.deductions],
        "remaining": l.remaining,
        "exhausted": l.exhausted,
    }


def ledger_from_dict(d: Mapping[str, Any]) -> DemeritLedger:
    return DemeritLedger(int(d["starting_points"]), tuple((str(t), int(s)) for t, s in d["deductions"]))


def advice_to_dict(a: Advice) -> dict[str, Any]:
    return {
        "outcome": a.outcome.value,
        "conditions": {dim: sorted(v) for dim, v in sorted(a.conditions.items())},
        "demerit": ledger_to_dict(a.demerit),
        "rationale": a.rationale,
        "nc_count": a.nc_count,
        "ob_count": a.ob_count,
    }


def advice_from_dict(d: Mapping[str, Any]) -> Advice:
    return Advice(
        Outcome(d["outcome"]),
        {dim: frozenset(v) for dim, v in d["conditions"].items()},
        ledger_from_dict(d["demerit"]),
        d["rationale"],
        int(d["nc_count"]),
        int(d["ob_count"]),
    )
