"""Results table and advice report, as ASCII text or machine-readable JSON."""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import SchemaError, ValidationError
from .rating import Rating
from .session import Phase, Session
from .verdict import Fidelity, TestAssessment

REPORT_SCHEMA = "veritas-report/1"

RATING_MARKS = {Rating.FAIL: "F", Rating.ACCEPTABLE: "A", Rating.FAIR: "R", Rating.GOOD: "G"}
PASS_MARK, NOPASS_MARK, NONE_MARK = "P", "X", "-"


class Format(str, Enum):
    TEXT = "text"
    MACHINE = "machine"


@dataclass(frozen=True)
class ReportHeader:
    session_id: str
    catalog_digest: str
    starting_points: int | None = None
    deducted: int | None = None
    remaining: int | None = None
    exhausted: bool | None = None


@dataclass(frozen=True)
class ReportRow:
    test_id: str
    applicant: Rating | None
    assessor: Rating | None
    fidelity: Fidelity
    passed: bool
    nc: int = 0
    ob: int = 0

    @classmethod
    def from_assessment(cls, a: TestAssessment) -> "ReportRow":
        return cls(a.test_id, a.applicant_rating, a.assessor_rating, a.fidelity, a.passed, len(a.ncs), len(a.obs))

    def marks(self) -> tuple[str, ...]:
        findings = " ".join(m for m, n in (("NC", self.nc), ("OB", self.ob)) if n)
        return (
            RATING_MARKS[self.applicant] if self.applicant is not None else NONE_MARK,
            RATING_MARKS[self.assessor] if self.assessor is not None else NONE_MARK,
            # an unchecked test is not a fidelity failure, so it gets the pass mark
            NOPASS_MARK if self.fidelity is Fidelity.FAIL else PASS_MARK,
            PASS_MARK if self.passed else NOPASS_MARK,
            findings or NONE_MARK,
        )


@dataclass(frozen=True)
class AdviceSection:
    outcome: str
    conditions: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    rationale: str = ""
    nc_total: int = 0
    ob_total: int = 0
    auto_fail: bool = False


@dataclass(frozen=True)
class ReportDocument:
    header: ReportHeader
    rows: tuple[ReportRow, ...]
    advice: AdviceSection | None
    expected_rows: int = 0

    def __post_init__(self) -> None:
        auto_fail = self.advice is not None and self.advice.auto_fail
        if not auto_fail and len(self.rows) != self.expected_rows:
            raise ValidationError(
                f"report has {len(self.rows)} rows but the catalog has {self.expected_rows} tests", field="rows"
            )


def build_report(session: Session) -> ReportDocument:
    """Report for a session that has been assessed (or closed as an auto-fail)."""
    cat = session.catalog
    ledger = session.ledger
    header = ReportHeader(
        session.session_id,
        cat.digest(),
        *(
            (ledger.starting_points, ledger.total_deducted, ledger.remaining, ledger.exhausted)
            if ledger is not None
            else ()
        ),
    )
    if session.phase is Phase.CLOSED_AUTO_FAIL:
        advice = AdviceSection("reject", rationale=str(session.selection), auto_fail=True)
        return ReportDocument(header, (), advice, len(cat.ids))
    if session.assessments is None:
        raise ValidationError(f"session in phase {session.phase.value} has not been assessed yet")
    rows = tuple(ReportRow.from_assessment(a) for a in session.assessments)
    advice = None
    if session.advice is not None:
        a = session.advice
        advice = AdviceSection(
            a.outcome.value,
            {d: tuple(sorted(v)) for d, v in sorted(a.conditions.items())},
            a.rationale,
            a.nc_count,
            a.ob_count,
        )
    return ReportDocument(header, rows, advice, len(cat.ids))


def format_row(row: ReportRow, id_width: int = 3) -> str:
    return "  ".join((row.test_id.ljust(id_width), *row.marks()))


def _render_text(doc: ReportDocument) -> str:
    h = doc.header
    lines = [
        f"session: {h.session_id}",
        f"catalog: {h.catalog_digest}",
    ]
    if h.starting_points is not None:
        state = " (exhausted)" if h.exhausted else ""
        lines.append(f"demerit points: {h.remaining}/{h.starting_points} remaining, {h.deducted} deducted{state}")
    if doc.rows:
        width = max(3, *(len(r.test_id) for r in doc.rows))
        lines.append("")
        lines.append("columns: id, applicant, assessor, fidelity, P/F, NC/OB")
        lines.append("marks: F=fail A=acceptable R=fair G=good P=pass X=nopass")
        lines.extend(format_row(r, width) for r in doc.rows)
    if doc.advice is not None:
        a = doc.advice
        lines.append("")
        lines.append(f"outcome: {a.outcome}" + (" (auto-fail)" if a.auto_fail else ""))
        for dim, values in a.conditions.items():
            lines.append(f"condition: exclude {dim} in {{{', '.join(values)}}}")
        lines.append(f"non-conformities: {a.nc_total}  observations: {a.ob_total}")
        if a.rationale:
            lines.append(f"rationale: {a.rationale}")
    return "\n".join(lines) + "\n"


def report_to_dict(doc: ReportDocument) -> dict[str, Any]:
    h = doc.header
    return {
        "schema": REPORT_SCHEMA,
        "header": {
            "session_id": h.session_id,
            "catalog_digest": h.catalog_digest,
            "starting_points": h.starting_points,
            "deducted": h.deducted,
            "remaining": h.remaining,
            "exhausted": h.exhausted,
        },
        "expected_rows": doc.expected_rows,
        "rows": [
            {
                "test_id": r.test_id,
                "applicant": None if r.applicant is None else r.applicant.label,
                "assessor": None if r.assessor is None else r.assessor.label,
                "fidelity": r.fidelity.value,
                "passed": r.passed,
                "nc": r.nc,
                "ob": r.ob,
            }
            for r in doc.rows
        ],
        "advice": None
        if doc.advice is None
        else {
            "outcome": doc.advice.outcome,
            "conditions": {d: list(v) for d, v in doc.advice.conditions.items()},
            "rationale": doc.advice.rationale,
            "nc_total": doc.advice.nc_total,
            "ob_total": doc.advice.ob_total,
            "auto_fail": doc.advice.auto_fail,
        },
    }


def report_from_dict(d: Mapping[str, Any]) -> ReportDocument:
    if not isinstance(d, Mapping) or d.get("schema") != REPORT_SCHEMA:
        raise SchemaError(f"report must declare schema {REPORT_SCHEMA!r}")
    opt_rating = lambda s: None if s is None else Rating.parse(s)  # noqa: E731
    rows = tuple(
        ReportRow(
            r["test_id"], opt_rating(r["applicant"]), opt_rating(r["assessor"]), Fidelity(r["fidelity"]),
            bool(r["passed"]), int(r["nc"]), int(r["ob"]),
        )
        for r in d["rows"]
    )
    a = d["advice"]
    advice = None
    if a is not None:
        advice = AdviceSection(
            a["outcome"], {k: tuple(v) for k, v in a["conditions"].items()}, a["rationale"],
            int(a["nc_total"]), int(a["ob_total"]), bool(a["auto_fail"]),
        )
    return ReportDocument(ReportHeader(**d["header"]), rows, advice, int(d["expected_rows"]))


def render_table(doc: ReportDocument, fmt: Format | str = Format.TEXT) -> bytes:
    if Format(fmt) is Format.MACHINE:
        return (json.dumps(report_to_dict(doc), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    return _render_text(doc).encode("utf-8")


def parse_machine(data: bytes | str) -> ReportDocument:
    try:
        return report_from_dict(json.loads(data))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"report is not valid JSON: {exc}") from exc
