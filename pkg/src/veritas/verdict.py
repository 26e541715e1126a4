"""Per-test assessment, demerit accounting and the advice to the authority."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Any

from .catalog import Catalog, id_sort_key
from .errors import NoResult, SchemaError, ValidationError
from .rating import Rating
from .results import ApplicantReport, AssessorReport, ResultEntry

DEFAULT_STARTING_POINTS = 100


class Fidelity(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_CHECKED = "not_checked"


class FindingKind(str, Enum):
    NC = "NC"
    OB = "OB"


class Cause(str, Enum):
    ACCEPTABLE_RESULT = "AcceptableResult"
    FIDELITY_MISMATCH = "FidelityMismatch"
    OBSERVATION = "Observation"


class Outcome(str, Enum):
    APPROVE = "approve"
    APPROVE_WITH_CONDITIONS = "approve_with_conditions"
    REJECT = "reject"


@dataclass(frozen=True)
class Finding:
    kind: FindingKind
    cause: Cause
    severity: int | None = None
    note: str = ""
    # Further causes folded into this single NC (one NC mark per test).
    merged_causes: tuple[Cause, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is FindingKind.OB:
            if self.cause is not Cause.OBSERVATION or self.severity is not None or self.merged_causes:
                raise ValidationError("an OB carries cause Observation and no severity", field="finding")
        else:
            if self.cause is Cause.OBSERVATION or any(c is Cause.OBSERVATION for c in self.merged_causes):
                raise ValidationError("an NC cannot be caused by an observation", field="finding")
            if self.severity not in (1, 2, 3):
                raise ValidationError(f"NC severity must be 1, 2 or 3, got {self.severity!r}", field="severity")

    @property
    def causes(self) -> tuple[Cause, ...]:
        return (self.cause, *self.merged_causes)


@dataclass(frozen=True)
class TestAssessment:
    __test__ = False

    test_id: str
    applicant_rating: Rating | None
    assessor_rating: Rating | None
    effective_rating: Rating
    fidelity: Fidelity
    findings: tuple[Finding, ...] = ()

    @property
    def passed(self) -> bool:
        return self.effective_rating > Rating.FAIL

    @property
    def ncs(self) -> list[Finding]:
        return [f for f in self.findings if f.kind is FindingKind.NC]

    @property
    def obs(self) -> list[Finding]:
        return [f for f in self.findings if f.kind is FindingKind.OB]


@dataclass(frozen=True)
class SeverityPolicy:
    """Demerit points per NC cause.

    ``fidelity_mismatch=None`` uses the ordinal gap between the applicant's
    and the assessor's rating, clamped to 1..3.
    """

    acceptable_result: int = 1
    fidelity_mismatch: int | None = None

    def __post_init__(self) -> None:
        for name in ("acceptable_result", "fidelity_mismatch"):
            v = getattr(self, name)
            if v is not None and v not in (1, 2, 3):
                raise ValidationError(f"{name} severity must be 1, 2 or 3", field=name)

    def severity(self, cause: Cause, applicant: Rating | None = None, assessor: Rating | None = None) -> int:
        if cause is Cause.ACCEPTABLE_RESULT:
            return self.acceptable_result
        if self.fidelity_mismatch is not None:
            return self.fidelity_mismatch
        gap = int(applicant) - int(assessor) if applicant is not None and assessor is not None else 1
        return min(3, max(1, gap))

    def to_dict(self) -> dict[str, Any]:
        return {
            Cause.ACCEPTABLE_RESULT.value: self.acceptable_result,
            Cause.FIDELITY_MISMATCH.value: "gap" if self.fidelity_mismatch is None else self.fidelity_mismatch,
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SeverityPolicy":
        if not isinstance(doc, Mapping):
            raise SchemaError("severity policy must be an object")
        unknown = set(doc) - {Cause.ACCEPTABLE_RESULT.value, Cause.FIDELITY_MISMATCH.value}
        if unknown:
            raise SchemaError(f"unknown severity policy keys: {sorted(unknown)}")
        fm = doc.get(Cause.FIDELITY_MISMATCH.value, "gap")
        return cls(
            acceptable_result=int(doc.get(Cause.ACCEPTABLE_RESULT.value, 1)),
            fidelity_mismatch=None if fm == "gap" else int(fm),
        )


def load_severity_policy(source: bytes | str | IO) -> SeverityPolicy:
    if hasattr(source, "read"):
        source = source.read()
    try:
        return SeverityPolicy.from_dict(json.loads(source))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"severity policy is not valid JSON: {exc}") from exc


def fidelity_check(applicant: Rating, assessor: Rating) -> Fidelity:
    return Fidelity.FAIL if assessor < applicant else Fidelity.PASS


def assess_test(
    test_id: str,
    applicant: ResultEntry | Rating | None,
    assessor: ResultEntry | Rating | None,
    severity_policy: SeverityPolicy = SeverityPolicy(),
    observations: Iterable[str] = (),
) -> TestAssessment:
    """Combine the applicant's and the assessor's ratings for one test.

    The effective rating is the worse of the two. NCs are only raised on
    passed tests; a failed test is already the stronger verdict.
    """
    a = applicant.rating if isinstance(applicant, ResultEntry) else applicant
    b = assessor.rating if isinstance(assessor, ResultEntry) else assessor
    present = [r for r in (a, b) if r is not None]
    if not present:
        raise NoResult(f"test {test_id} has neither an applicant nor an assessor result")
    effective = min(present)
    fidelity = fidelity_check(a, b) if a is not None and b is not None else Fidelity.NOT_CHECKED

    findings: list[Finding] = []
    if effective > Rating.FAIL:
        causes = []
        if fidelity is Fidelity.FAIL:
            causes.append(Cause.FIDELITY_MISMATCH)
        if effective is Rating.ACCEPTABLE:
            causes.append(Cause.ACCEPTABLE_RESULT)
        if causes:
            notes = []
            if Cause.FIDELITY_MISMATCH in causes:
                notes.append(f"assessor result {b.label} is worse than applicant result {a.label}")
            if Cause.ACCEPTABLE_RESULT in causes:
                notes.append("result only meets the acceptable reference")
            severity = max(severity_policy.severity(c, a, b) for c in causes)
            findings.append(Finding(FindingKind.NC, causes[0], severity, "; ".join(notes), tuple(causes[1:])))
    findings.extend(Finding(FindingKind.OB, Cause.OBSERVATION, None, note) for note in observations)
    return TestAssessment(test_id, a, b, effective, fidelity, tuple(findings))


@dataclass(frozen=True)
class DemeritLedger:
    starting_points: int = DEFAULT_STARTING_POINTS
    deductions: tuple[tuple[str, int], ...] = ()

    @property
    def total_deducted(self) -> int:
        return sum(s for _, s in self.deductions)

    @property
    def remaining(self) -> int:
        return max(0, self.starting_points - self.total_deducted)

    @property
    def exhausted(self) -> bool:
        return self.total_deducted >= self.starting_points


def apply_demerits(
    assessments: Iterable[TestAssessment], starting_points: int = DEFAULT_STARTING_POINTS
) -> DemeritLedger:
    if starting_points < 0:
        raise ValidationError("starting points must be non-negative", field="starting_points")
    deductions = sorted(
        ((a.test_id, f.severity) for a in assessments for f in a.ncs), key=lambda d: (id_sort_key(d[0]), d[1])
    )
    return DemeritLedger(starting_points, tuple(deductions))


@dataclass(frozen=True)
class Advice:
    outcome: Outcome
    conditions: Mapping[str, frozenset[str]] = field(default_factory=dict)
    demerit: DemeritLedger = DemeritLedger()
    rationale: str = ""
    nc_count: int = 0
    ob_count: int = 0

    def __post_init__(self) -> None:
        if bool(self.conditions) != (self.outcome is Outcome.APPROVE_WITH_CONDITIONS):
            raise ValidationError("conditions must be present exactly for conditional approval", field="conditions")


def _restriction(catalog: Catalog, failed: Sequence[TestAssessment]) -> dict[str, frozenset[str]] | None:
    tags = [catalog.get(a.test_id).tags for a in failed]
    if any(not t for t in tags):
        return None
    excluded: dict[str, set[str]] = {}
    for t in tags:
        for dim, value in t.items():
            excluded.setdefault(dim, set()).add(value)
    # The restricted ODD must still contain at least one value per dimension.
    for dim in catalog.odd.dimensions:
        if set(dim.values) <= excluded.get(dim.name, set()):
            return None
    admissible = [
        c
        for c in catalog.domain.required_combinations
        if not any(value in excluded.get(dim, ()) for dim, value in c)
    ]
    if not admissible:
        return None
    return {dim: frozenset(values) for dim, values in sorted(excluded.items())}


def synthesize_advice(catalog: Catalog, assessments: Iterable[TestAssessment], ledger: DemeritLedger) -> Advice:
    assessments = sorted(assessments, key=lambda a: id_sort_key(a.test_id))
    ncs = sum(len(a.ncs) for a in assessments)
    obs = sum(len(a.obs) for a in assessments)
    counts = dict(demerit=ledger, nc_count=ncs, ob_count=obs)
    if ledger.exhausted:
        return Advice(
            Outcome.REJECT,
            rationale=f"overrun of NCs: {ledger.total_deducted} demerit points deducted "
            f"from {ledger.starting_points}",
            **counts,
        )
    failed = [a for a in assessments if not a.passed]
    if not failed:
        return Advice(Outcome.APPROVE, rationale=f"all {len(assessments)} tests passed", **counts)
    failed_ids = ", ".join(a.test_id for a in failed)
    conditions = _restriction(catalog, failed)
    if conditions is None:
        return Advice(
            Outcome.REJECT,
            rationale=f"failed tests {failed_ids} cannot be excluded by an ODD restriction",
            **counts,
        )
    excluded = "; ".join(f"{dim} not in {{{', '.join(sorted(v))}}}" for dim, v in conditions.items())
    return Advice(
        Outcome.APPROVE_WITH_CONDITIONS,
        conditions,
        rationale=f"failed tests {failed_ids} lie outside the restricted ODD ({excluded})",
        **counts,
    )



def assess_all(
    catalog: Catalog,
    applicant: ApplicantReport,
    assessor: AssessorReport,
    severity_policy: SeverityPolicy = SeverityPolicy(),
) -> list[TestAssessment]:
    return [
        assess_test(
            tid, applicant.get(tid), assessor.get(tid), severity_policy, assessor.notes_for(tid)
        )
        for tid in catalog.ids
    ]
