import json
from dataclasses import replace
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import three_of_four_catalog
from veritas.errors import (
    CorruptState,
    IllegalTransition,
    StaleSession,
    UnauthorizedRole,
    ValidationError,
    VersionMismatch,
)
from veritas.rating import Rating
from veritas.results import ApplicantReport, AssessorReport, ResultEntry
from veritas.session import (
    ACTIONS,
    TRANSITIONS,
    Action,
    Phase,
    Role,
    advance,
    new_session,
    persist,
    restore,
    verify_chain,
)
from veritas.verdict import Outcome

CLOCK = lambda: datetime(2026, 1, 2, 3, 4, 5, tzinfo=timezone.utc)  # noqa: E731

SPEC_EDGES = {
    (Phase.DERIVE_TESTS, Phase.COVERAGE_CHECK),
    (Phase.COVERAGE_CHECK, Phase.DERIVE_TESTS),
    (Phase.COVERAGE_CHECK, Phase.SELECT_TESTS),
    (Phase.SELECT_TESTS, Phase.COLLECT_RESULTS),
    (Phase.SELECT_TESTS, Phase.CLOSED_AUTO_FAIL),
    (Phase.COLLECT_RESULTS, Phase.ASSESS),
    (Phase.ASSESS, Phase.REPORT),
    (Phase.REPORT, Phase.CLOSED_ADVISED),
    (Phase.CLOSED_ADVISED, Phase.MONITORED_DEPLOYMENT),
}


def step(s, action, payload=None):
    return advance(s, action, ACTIONS[action][1], payload, clock=CLOCK)


def run_to(phase, catalog, applicant, assessor, policy, *, missing_ok=True):
    s = new_session(catalog, "s-1", clock=CLOCK)
    plan = [
        (Action.SUBMIT_TESTS, None),
        (Action.CHECK_COVERAGE, None),
        (Action.SELECT_TESTS, {"applicant_report": applicant, "policy": policy}),
        (Action.IMPORT_RESULTS, {"assessor_report": assessor}),
        (Action.ASSESS, None),
        (Action.ADVISE, None),
        (Action.BEGIN_MONITORING, None),
    ]
    for action, payload in plan:
        if s.phase is phase:
            return s
        s = step(s, action, payload)
    assert s.phase is phase
    return s


@pytest.fixture
def golden_run(golden_catalog, golden_applicant, golden_assessor, golden_policy):
    return lambda phase: run_to(phase, golden_catalog, golden_applicant, golden_assessor, golden_policy)


def test_full_workflow(golden_run):
    s = golden_run(Phase.MONITORED_DEPLOYMENT)
    assert s.advice.outcome is Outcome.APPROVE_WITH_CONDITIONS
    assert [e.action for e in s.events] == ["open"] + [a.value for a in Action]
    verify_chain(s.events)


def _cycles(edges):
    graph = {}
    for a, b in edges:
        graph.setdefault(a, set()).add(b)
    found = set()

    def dfs(start, node, path):
        for nxt in graph.get(node, ()):
            if nxt == start:
                found.add(frozenset(path))
            elif nxt not in path:
                dfs(start, nxt, path + [nxt])

    for n in graph:
        dfs(n, n, [n])
    return found


def test_transition_table_is_exactly_the_legal_edges(golden_catalog, golden_applicant, golden_assessor, golden_policy):
    table = {(a, b) for a, bs in TRANSITIONS.items() for b in bs}
    assert table == SPEC_EDGES
    assert _cycles(table) == {frozenset({Phase.DERIVE_TESTS, Phase.COVERAGE_CHECK})}

    observed = set()
    payloads = {
        Action.SELECT_TESTS: [
            {"applicant_report": golden_applicant, "policy": golden_policy},
            {"applicant_report": ApplicantReport(), "policy": golden_policy},
        ],
        Action.IMPORT_RESULTS: [{"assessor_report": golden_assessor}],
    }
    starts = [
        run_to(p, golden_catalog, golden_applicant, golden_assessor, golden_policy)
        for p in Phase
        if p not in (Phase.CLOSED_AUTO_FAIL,)
    ]
    incomplete = new_session(three_of_four_catalog(), "s-2", clock=CLOCK)
    starts.append(step(incomplete, Action.SUBMIT_TESTS))
    starts.append(
        step(
            run_to(Phase.SELECT_TESTS, golden_catalog, golden_applicant, golden_assessor, golden_policy),
            Action.SELECT_TESTS,
            {"applicant_report": ApplicantReport(), "policy": golden_policy},
        )
    )
    for s in starts:
        for action, (phase, role) in ACTIONS.items():
            for payload in payloads.get(action, [None]):
                try:
                    nxt = advance(s, action, role, payload, clock=CLOCK)
                except IllegalTransition:
                    assert s.phase is not phase or action is Action.BEGIN_MONITORING
                    continue
                assert s.phase is phase
                observed.add((s.phase, nxt.phase))
    assert observed == SPEC_EDGES


def test_coverage_not_ok_restarts(golden_catalog):
    s = new_session(three_of_four_catalog(), "s", clock=CLOCK)
    s = step(step(s, Action.SUBMIT_TESTS), Action.CHECK_COVERAGE)
    assert s.phase is Phase.DERIVE_TESTS and not s.coverage.ok
    s = step(s, Action.SUBMIT_TESTS, {"catalog": golden_catalog})
    s = step(s, Action.CHECK_COVERAGE)
    assert s.phase is Phase.SELECT_TESTS and s.catalog == golden_catalog


def test_missing_overrun_closes_auto_fail(golden_catalog, golden_policy, golden_applicant):
    s = run_to(Phase.SELECT_TESTS, golden_catalog, None, None, None)
    drop = {k: v for k, v in golden_applicant.entries.items() if k not in ("1.2", "2.3")}
    s = step(s, Action.SELECT_TESTS, {"applicant_report": ApplicantReport(drop), "policy": golden_policy})
    assert s.phase is Phase.CLOSED_AUTO_FAIL
    for action, (_, role) in ACTIONS.items():
        with pytest.raises(IllegalTransition):
            advance(s, action, role)


def test_reject_blocks_monitoring(golden_run):
    s = step(golden_run(Phase.ASSESS), Action.ASSESS, {"starting_points": 1})
    s = step(s, Action.ADVISE)
    assert s.advice.outcome is Outcome.REJECT
    with pytest.raises(IllegalTransition):
        step(s, Action.BEGIN_MONITORING)


def test_approve_opens_monitoring(golden_catalog, golden_policy):
    good = ApplicantReport({t: ResultEntry(Rating.GOOD) for t in golden_catalog.ids})
    ass = AssessorReport({t: ResultEntry(Rating.GOOD) for t in sorted(golden_policy.inconsistency_flags)})
    s = run_to(Phase.MONITORED_DEPLOYMENT, golden_catalog, good, ass, golden_policy)
    assert s.advice.outcome is Outcome.APPROVE


def test_role_gating(golden_run):
    s = golden_run(Phase.COVERAGE_CHECK)
    for role in (Role.APPLICANT, Role.AUTHORITY):
        with pytest.raises(UnauthorizedRole):
            advance(s, Action.CHECK_COVERAGE, role, clock=CLOCK)
    s = new_session(s.catalog, clock=CLOCK)
    with pytest.raises(UnauthorizedRole):
        advance(s, Action.SUBMIT_TESTS, Role.ASSESSOR, clock=CLOCK)
    with pytest.raises(IllegalTransition):
        advance(s, "launch", Role.ASSESSOR, clock=CLOCK)


def test_import_rejects_unselected_results(golden_run):
    s = golden_run(Phase.COLLECT_RESULTS)
    with pytest.raises(ValidationError):
        step(s, Action.IMPORT_RESULTS, {"assessor_report": AssessorReport({"1.2": ResultEntry(Rating.GOOD)})})


def test_stale_in_memory_state(golden_run):
    s = golden_run(Phase.SELECT_TESTS)
    tampered = replace(s, phase=Phase.ASSESS)
    with pytest.raises(StaleSession):
        advance(tampered, Action.ASSESS, Role.ASSESSOR, clock=CLOCK)


@pytest.mark.parametrize("phase", list(Phase))
def test_persist_round_trip(phase, golden_catalog, golden_applicant, golden_assessor, golden_policy):
    if phase is Phase.CLOSED_AUTO_FAIL:
        s = run_to(Phase.SELECT_TESTS, golden_catalog, None, None, None)
        s = step(s, Action.SELECT_TESTS, {"applicant_report": ApplicantReport(), "policy": golden_policy})
    else:
        s = run_to(phase, golden_catalog, golden_applicant, golden_assessor, golden_policy)
    data = persist(s)
    restored = restore(data)
    assert restored == s
    assert persist(restored) == data


@pytest.mark.parametrize("phase, stride", [(Phase.COVERAGE_CHECK, 1), (Phase.CLOSED_ADVISED, 7)])
def test_single_byte_corruption_detected(golden_run, phase, stride):
    data = persist(golden_run(phase))
    schema_at = data.index(b"veritas-session/1")
    for pos in range(0, len(data), stride):
        corrupted = bytearray(data)
        corrupted[pos] ^= 0x01
        expected = (CorruptState, VersionMismatch) if schema_at <= pos < schema_at + 17 else CorruptState
        with pytest.raises(expected):
            restore(bytes(corrupted))


def test_event_log_edit_detected(golden_run):
    doc = json.loads(persist(golden_run(Phase.REPORT)))
    doc["events"][2]["role"] = "authority"
    with pytest.raises(CorruptState):
        restore((json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())


def test_version_mismatch(golden_run):
    data = persist(golden_run(Phase.SELECT_TESTS)).replace(b"veritas-session/1", b"veritas-session/0")
    with pytest.raises(VersionMismatch):
        restore(data)


def test_timestamps_are_utc_seconds(golden_run):
    s = golden_run(Phase.ASSESS)
    assert {e.timestamp for e in s.events} == {"2026-01-02T03:04:05Z"}
    assert all(len(e.digest) == 64 for e in s.events)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(list(Action)), st.sampled_from(list(Role))), max_size=15))
def test_random_action_sequences(golden_catalog, golden_applicant, golden_assessor, golden_policy, seq):
    payloads = {
        Action.SELECT_TESTS: {"applicant_report": golden_applicant, "policy": golden_policy},
        Action.IMPORT_RESULTS: {"assessor_report": golden_assessor},
    }
    s = new_session(golden_catalog, "s", clock=CLOCK)
    for action, role in seq:
        before = len(s.events)
        try:
            nxt = advance(s, action, role, payloads.get(action), clock=CLOCK)
        except (IllegalTransition, UnauthorizedRole):
            continue
        assert len(nxt.events) == before + 1
        assert nxt.phase in TRANSITIONS[s.phase]
        if nxt.phase is Phase.ASSESS:
            assert nxt.coverage is not None and nxt.coverage.ok and nxt.selection is not None
        s = nxt
