"""Assessment workflow: phases, role-gated actions and a hash-chained event log.

A session moves DeriveTests -> CoverageCheck -> SelectTests -> CollectResults
-> Assess -> Report -> Closed. An incomplete catalog sends it back to
DeriveTests; too many missing applicant results close it as an auto-fail.
"""

from __future__ import annotations

import json
import uuid
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from . import codec
from .catalog import Catalog, CoverageReport, catalog_from_dict, catalog_to_dict, check_coverage
from .errors import (
    CorruptState,
    IllegalTransition,
    StaleSession,
    UnauthorizedRole,
    ValidationError,
    VersionMismatch,
)
from .results import (
    ApplicantReport,
    AssessorReport,
    applicant_from_dict,
    applicant_to_dict,
    assessor_from_dict,
    assessor_to_dict,
)
from .selection import AutoFail, SelectionDecision, SelectionPolicy, select_tests, selected_ids
from .verdict import (
    DEFAULT_STARTING_POINTS,
    Advice,
    DemeritLedger,
    Outcome,
    SeverityPolicy,
    TestAssessment,
    apply_demerits,
    assess_all,
    synthesize_advice,
)

SESSION_SCHEMA = "veritas-session/1"
GENESIS_DIGEST = "0" * 64


class Role(str, Enum):
    APPLICANT = "applicant"
    ASSESSOR = "assessor"
    AUTHORITY = "authority"


class Phase(str, Enum):
    DERIVE_TESTS = "derive_tests"
    COVERAGE_CHECK = "coverage_check"
    SELECT_TESTS = "select_tests"
    COLLECT_RESULTS = "collect_results"
    ASSESS = "assess"
    REPORT = "report"
    CLOSED_AUTO_FAIL = "closed_auto_fail"
    CLOSED_ADVISED = "closed_advised"
    MONITORED_DEPLOYMENT = "monitored_deployment"


class Action(str, Enum):
    SUBMIT_TESTS = "submit_tests"
    CHECK_COVERAGE = "check_coverage"
    SELECT_TESTS = "select_tests"
    IMPORT_RESULTS = "import_results"
    ASSESS = "assess"
    ADVISE = "advise"
    BEGIN_MONITORING = "begin_monitoring"


# Legal phase edges; the only cycle is the coverage restart.
TRANSITIONS: Mapping[Phase, frozenset[Phase]] = {
    Phase.DERIVE_TESTS: frozenset({Phase.COVERAGE_CHECK}),
    Phase.COVERAGE_CHECK: frozenset({Phase.DERIVE_TESTS, Phase.SELECT_TESTS}),
    Phase.SELECT_TESTS: frozenset({Phase.COLLECT_RESULTS, Phase.CLOSED_AUTO_FAIL}),
    Phase.COLLECT_RESULTS: frozenset({Phase.ASSESS}),
    Phase.ASSESS: frozenset({Phase.REPORT}),
    Phase.REPORT: frozenset({Phase.CLOSED_ADVISED}),
    Phase.CLOSED_ADVISED: frozenset({Phase.MONITORED_DEPLOYMENT}),
    Phase.CLOSED_AUTO_FAIL: frozenset(),
    Phase.MONITORED_DEPLOYMENT: frozenset(),
}

# action -> (phase it is legal in, role allowed to perform it)
ACTIONS: Mapping[Action, tuple[Phase, Role]] = {
    Action.SUBMIT_TESTS: (Phase.DERIVE_TESTS, Role.APPLICANT),
    Action.CHECK_COVERAGE: (Phase.COVERAGE_CHECK, Role.ASSESSOR),
    Action.SELECT_TESTS: (Phase.SELECT_TESTS, Role.ASSESSOR),
    Action.IMPORT_RESULTS: (Phase.COLLECT_RESULTS, Role.ASSESSOR),
    Action.ASSESS: (Phase.ASSESS, Role.ASSESSOR),
    Action.ADVISE: (Phase.REPORT, Role.ASSESSOR),
    Action.BEGIN_MONITORING: (Phase.CLOSED_ADVISED, Role.APPLICANT),
}


def _now() -> datetime:
    return datetime.now(timezone.utc)


def _timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class Event:
    seq: int
    timestamp: str
    role: Role
    action: str
    payload_digest: str
    state_digest: str
    prev_digest: str
    digest: str = ""

    def body(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "role": self.role.value,
            "action": self.action,
            "payload_digest": self.payload_digest,
            "state_digest": self.state_digest,
            "prev_digest": self.prev_digest,
        }

    def compute_digest(self) -> str:
        return codec.digest(self.body())

    def to_dict(self) -> dict[str, Any]:
        return {**self.body(), "digest": self.digest}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Event":
        return cls(
            int(d["seq"]),
            str(d["timestamp"]),
            Role(d["role"]),
            str(d["action"]),
            str(d["payload_digest"]),
            str(d["state_digest"]),
            str(d["prev_digest"]),
            str(d["digest"]),
        )


@dataclass(frozen=True)
class Session:
    session_id: str
    phase: Phase
    catalog: Catalog
    coverage: CoverageReport | None = None
    policy: SelectionPolicy | None = None
    applicant_report: ApplicantReport | None = None
    selection: list[SelectionDecision] | AutoFail | None = None
    assessor_report: AssessorReport | None = None
    severity_policy: SeverityPolicy | None = None
    assessments: tuple[TestAssessment, ...] | None = None
    ledger: DemeritLedger | None = None
    advice: Advice | None = None
    events: tuple[Event, ...] = field(default=())

    @property
    def head(self) -> str:
        return self.events[-1].digest if self.events else GENESIS_DIGEST

    @property
    def auto_failed(self) -> bool:
        return self.phase is Phase.CLOSED_AUTO_FAIL

    def state_dict(self) -> dict[str, Any]:
        opt = lambda v, f: None if v is None else f(v)  # noqa: E731
        return {
            "session_id": self.session_id,
            "phase": self.phase.value,
            "catalog": catalog_to_dict(self.catalog),
            "coverage": opt(self.coverage, codec.coverage_to_dict),
            "policy": opt(self.policy, SelectionPolicy.to_dict),
            "applicant_report": opt(self.applicant_report, applicant_to_dict),
            "selection": opt(self.selection, codec.selection_to_dict),
            "assessor_report": opt(self.assessor_report, assessor_to_dict),
            "severity_policy": opt(self.severity_policy, SeverityPolicy.to_dict),
            "assessments": opt(self.assessments, lambda xs: [codec.assessment_to_dict(a) for a in xs]),
            "ledger": opt(self.ledger, codec.ledger_to_dict),
            "advice": opt(self.advice, codec.advice_to_dict),
        }

    def state_digest(self) -> str:
        return codec.digest(self.state_dict())


def _state_from_dict(d: Mapping[str, Any]) -> dict[str, Any]:
    opt = lambda v, f: None if v is None else f(v)  # noqa: E731
    return {
        "session_id": d["session_id"],
        "phase": Phase(d["phase"]),
        "catalog": catalog_from_dict(d["catalog"]),
        "coverage": opt(d["coverage"], codec.coverage_from_dict),
        "policy": opt(d["policy"], SelectionPolicy.from_dict),
        "applicant_report": opt(d["applicant_report"], applicant_from_dict),
        "selection": opt(d["selection"], codec.selection_from_dict),
        "assessor_report": opt(d["assessor_report"], assessor_from_dict),
        "severity_policy": opt(d["severity_policy"], SeverityPolicy.from_dict),
        "assessments": opt(d["assessments"], lambda xs: tuple(codec.assessment_from_dict(a) for a in xs)),
        "ledger": opt(d["ledger"], codec.ledger_from_dict),
        "advice": opt(d["advice"], codec.advice_from_dict),
    }


def _record(
    session: Session, role: Role, action: str, payload: Any, clock: Callable[[], datetime]
) -> Session:
    event = Event(
        seq=len(session.events),
        timestamp=_timestamp(clock()),
        role=role,
        action=action,
        payload_digest=codec.digest(payload),
        state_digest=session.state_digest(),
        prev_digest=session.head,
    )
    event = replace(event, digest=event.compute_digest())
    return replace(session, events=(*session.events, event))


def new_session(
    catalog: Catalog, session_id: str | None = None, clock: Callable[[], datetime] = _now
) -> Session:
    """Open a session in DeriveTests with the applicant's initial catalog."""
    s = Session(session_id or uuid.uuid4().hex, Phase.DERIVE_TESTS, catalog)
    return _record(s, Role.APPLICANT, "open", {"catalog": catalog.digest()}, clock)


def _payload_get(payload: Mapping[str, Any] | None, key: str, default: Any = None) -> Any:
    return default if payload is None else payload.get(key, default)


def advance(
    session: Session,
    action: Action | str,
    role: Role | str,
    payload: Mapping[str, Any] | None = None,
    clock: Callable[[], datetime] = _now,
) -> Session:
    """Perform ``action`` as ``role`` and return the successor session.

    Payload keys by action: ``submit_tests``: optional ``catalog``;
    ``select_tests``: ``applicant_report`` and ``policy``;
    ``import_results``: ``assessor_report``; ``assess``: optional
    ``severity_policy`` and ``starting_points``.
    """
    try:
        action = Action(action)
    except ValueError:
        raise IllegalTransition(f"unknown action {action!r}") from None
    role = Role(role)
    if session.events and session.events[-1].state_digest != session.state_digest():
        raise StaleSession("session state does not match its event log head")
    legal_phase, allowed_role = ACTIONS[action]
    if session.phase is not legal_phase:
        raise IllegalTransition(f"{action.value} is not allowed in phase {session.phase.value}")
    if role is not allowed_role:
        raise UnauthorizedRole(f"{action.value} must be performed by the {allowed_role.value}, not the {role.value}")

    s = session
    record: dict[str, Any] = {}
    if action is Action.SUBMIT_TESTS:
        catalog = _payload_get(payload, "catalog", s.catalog)
        s = replace(s, phase=Phase.COVERAGE_CHECK, catalog=catalog, coverage=None)
        record = {"catalog": catalog.digest()}
    elif action is Action.CHECK_COVERAGE:
        cov = check_coverage(s.catalog)
        s = replace(s, phase=Phase.SELECT_TESTS if cov.ok else Phase.DERIVE_TESTS, coverage=cov)
        record = codec.coverage_to_dict(cov)
    elif action is Action.SELECT_TESTS:
        report = _payload_get(payload, "applicant_report")
        policy = _payload_get(payload, "policy", SelectionPolicy())
        if report is None:
            raise ValidationError("select_tests needs the applicant report", field="applicant_report")
        sel = select_tests(s.catalog, report, policy)
        phase = Phase.CLOSED_AUTO_FAIL if isinstance(sel, AutoFail) else Phase.COLLECT_RESULTS
        s = replace(s, phase=phase, applicant_report=report, policy=policy, selection=sel)
        record = {"applicant_report": applicant_to_dict(report), "policy": policy.to_dict()}
    elif action is Action.IMPORT_RESULTS:
        report = _payload_get(payload, "assessor_report")
        if report is None:
            raise ValidationError("import_results needs the assessor report", field="assessor_report")
        chosen = set(selected_ids(s.selection))
        extra = sorted(set(report.entries) - chosen)
        if extra:
            raise ValidationError(f"assessor results for tests that were not selected: {', '.join(extra)}")
        stray = sorted({o.test_id for o in report.observations} - chosen)
        if stray:
            raise ValidationError(f"observations for tests that were not selected: {', '.join(stray)}")
        s = replace(s, phase=Phase.ASSESS, assessor_report=report)
        record = assessor_to_dict(report)
    elif action is Action.ASSESS:
        sev = _payload_get(payload, "severity_policy", SeverityPolicy())
        start = int(_payload_get(payload, "starting_points", DEFAULT_STARTING_POINTS))
        assessments = tuple(assess_all(s.catalog, s.applicant_report, s.assessor_report, sev))
        ledger = apply_demerits(assessments, start)
        s = replace(s, phase=Phase.REPORT, severity_policy=sev, assessments=assessments, ledger=ledger)
        record = {"severity_policy": sev.to_dict(), "starting_points": start}
    elif action is Action.ADVISE:
        advice = synthesize_advice(s.catalog, s.assessments, s.ledger)
        s = replace(s, phase=Phase.CLOSED_ADVISED, advice=advice)
        record = codec.advice_to_dict(advice)
    elif action is Action.BEGIN_MONITORING:
        if s.advice is None or s.advice.outcome is Outcome.REJECT:
            raise IllegalTransition("monitored deployment requires an approving advice")
        s = replace(s, phase=Phase.MONITORED_DEPLOYMENT)
        record = {"authority_decision": _payload_get(payload, "authority_decision", "")}

    assert s.phase in TRANSITIONS[session.phase]
    return _record(s, role, action.value, record, clock)


# -- persistence -------------------------------------------------------------


def _session_doc(session: Session) -> dict[str, Any]:
    return {
        "schema": SESSION_SCHEMA,
        "state": session.state_dict(),
        "events": [e.to_dict() for e in session.events],
    }


def persist(session: Session) -> bytes:
    return (json.dumps(_session_doc(session), indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode(
        "utf-8"
    )


def verify_chain(events: tuple[Event, ...]) -> None:
    prev = GENESIS_DIGEST
    for i, e in enumerate(events):
        if e.seq != i:
            raise CorruptState(f"event {i} has sequence number {e.seq}")
        if e.prev_digest != prev:
            raise CorruptState(f"event {i} does not chain to its predecessor")
        if e.compute_digest() != e.digest:
            raise CorruptState(f"event {i} digest does not match its content")
        prev = e.digest


def restore(data: bytes) -> Session:
    """Rebuild a session from :func:`persist` output, verifying its integrity."""
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptState(f"session file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "schema" not in doc:
        raise CorruptState("session file has no schema header")
    if doc["schema"] != SESSION_SCHEMA:
        raise VersionMismatch(f"expected {SESSION_SCHEMA!r}, found {doc['schema']!r}")
    try:
        events = tuple(Event.from_dict(e) for e in doc["events"])
        session = Session(**_state_from_dict(doc["state"]), events=events)
    except CorruptState:
        raise
    except Exception as exc:  # any decoding failure means the file was damaged
        raise CorruptState(f"session state cannot be decoded: {exc}") from exc
    verify_chain(events)
    if not events:
        raise CorruptState("session has an empty event log")
    if events[-1].state_digest != session.state_digest():
        raise CorruptState("session state does not match the digest recorded in its log")
    if persist(session) != data:
        raise CorruptState("session file is not in canonical form")
    return session
