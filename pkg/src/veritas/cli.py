"""``veritas`` command line.

Exit codes: 0 success, 1 validation or usage error, 2 when the assessment
ends in a reject advice or an auto-fail.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import codec
from .catalog import description_to_dict, load_catalog
from .errors import StaleSession, VeritasError
from .monitor import ingest, propose_tests, read_log
from .report import Format, build_report, render_table
from .results import dump_results, load_applicant_report, load_assessor_report
from .selection import AutoFail, SelectionPolicy, load_policy
from .session import Action, Phase, Role, Session, advance, new_session, persist, restore
from .simulator import BiasMode, ReportingBias, gen_profile, simulate_applicant, simulate_assessor
from .verdict import Outcome, SeverityPolicy, load_severity_policy

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2
DEFAULT_SESSION = "veritas-session.json"


class UsageError(Exception):
    pass


def _load_session(path: str) -> Session:
    return restore(Path(path).read_bytes())


def _save_session(path: str, session: Session, expected_head: str | None) -> None:
    target = Path(path)
    if expected_head is not None:
        on_disk = restore(target.read_bytes())
        if on_disk.head != expected_head:
            raise StaleSession(f"{path} changed since it was loaded")
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=".veritas-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(persist(session))
    os.replace(tmp, target)


def _emit(data: bytes, out: str | None) -> None:
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _require_session(args) -> str:
    if not args.session:
        raise UsageError(f"{args.command} requires --session")
    return args.session


def cmd_init(args) -> int:
    if not args.catalog:
        raise UsageError("init requires --catalog")
    catalog = load_catalog(Path(args.catalog).read_bytes())
    session = new_session(catalog, args.session_id)
    path = args.session or DEFAULT_SESSION
    _save_session(path, session, None)
    print(f"session {session.session_id} created at {path} ({len(catalog.tests)} tests)", file=sys.stderr)
    return EXIT_OK


def cmd_coverage(args) -> int:
    path = _require_session(args)
    s = _load_session(path)
    head = s.head
    if s.phase is Phase.DERIVE_TESTS:
        payload = {"catalog": load_catalog(Path(args.catalog).read_bytes())} if args.catalog else None
        s = advance(s, Action.SUBMIT_TESTS, Role.APPLICANT, payload)
    elif args.catalog:
        raise UsageError("a revised catalog can only be submitted in the derive-tests phase")
    s = advance(s, Action.CHECK_COVERAGE, Role.ASSESSOR)
    _save_session(path, s, head)
    _emit(_json_bytes(codec.coverage_to_dict(s.coverage)), args.out)
    if not s.coverage.ok:
        print("coverage NotOk: test descriptions must be revised", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_select(args) -> int:
    path = _require_session(args)
    if not args.results:
        raise UsageError("select requires --results (the applicant's results file)")
    s = _load_session(path)
    head = s.head
    report = load_applicant_report(Path(args.results).read_bytes())
    policy = load_policy(Path(args.policy).read_bytes()) if args.policy else SelectionPolicy()
    if args.seed is not None:
        policy = SelectionPolicy(
            policy.spot_check_fraction, policy.missing_fail_fraction, policy.inconsistency_flags, args.seed
        )
    s = advance(s, Action.SELECT_TESTS, Role.ASSESSOR, {"applicant_report": report, "policy": policy})
    _save_session(path, s, head)
    _emit(_json_bytes(codec.selection_to_dict(s.selection)), args.out)
    if isinstance(s.selection, AutoFail):
        print(str(s.selection), file=sys.stderr)
        return EXIT_REJECT
    return EXIT_OK


def cmd_import_results(args) -> int:
    path = _require_session(args)
    if not args.results:
        raise UsageError("import-results requires --results (the assessor's results file)")
    s = _load_session(path)
    head = s.head
    report = load_assessor_report(Path(args.results).read_bytes())
    s = advance(s, Action.IMPORT_RESULTS, Role.ASSESSOR, {"assessor_report": report})
    _save_session(path, s, head)
    return EXIT_OK


def cmd_assess(args) -> int:
    path = _require_session(args)
    s = _load_session(path)
    head = s.head
    payload = {
        "severity_policy": load_severity_policy(Path(args.severity_policy).read_bytes())
        if args.severity_policy
        else SeverityPolicy(),
        "starting_points": args.starting_points,
    }
    s = advance(s, Action.ASSESS, Role.ASSESSOR, payload)
    _save_session(path, s, head)
    _emit(_json_bytes([codec.assessment_to_dict(a) for a in s.assessments]), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    path = _require_session(args)
    s = _load_session(path)
    if s.phase is Phase.REPORT:
        head = s.head
        s = advance(s, Action.ADVISE, Role.ASSESSOR)
        _save_session(path, s, head)
    doc = build_report(s)
    _emit(render_table(doc, args.format), args.out)
    if s.auto_failed or (s.advice is not None and s.advice.outcome is Outcome.REJECT):
        return EXIT_REJECT
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.session:
        s = _load_session(args.session)
        catalog = s.catalog
    elif args.catalog:
        s = None
        catalog = load_catalog(Path(args.catalog).read_bytes())
    else:
        raise UsageError("simulate requires --catalog or --session")
    profile = gen_profile(catalog, args.seed, args.noise_sd)
    if args.role == "applicant":
        bias = ReportingBias(BiasMode(args.bias), delta=args.delta, margin=args.margin)
        omit = [t for t in (args.omit or "").split(",") if t]
        report = simulate_applicant(profile, bias, args.seed, omit)
    else:
        if s is None or s.selection is None or isinstance(s.selection, AutoFail):
            raise UsageError("simulating assessor results needs --session with a completed selection")
        report = simulate_assessor(profile, s.selection, args.seed)
    _emit(dump_results(report), args.out)
    return EXIT_OK


def cmd_monitor(args) -> int:
    path = _require_session(args)
    if not args.log:
        raise UsageError("monitor requires --log")
    s = _load_session(path)
    if s.phase is Phase.CLOSED_ADVISED:
        head = s.head
        s = advance(s, Action.BEGIN_MONITORING, Role.APPLICANT)
        _save_session(path, s, head)
    elif s.phase is not Phase.MONITORED_DEPLOYMENT:
        raise UsageError(f"monitoring needs an approved session, this one is in phase {s.phase.value}")
    with open(args.log, encoding="utf-8") as fh:
        report = ingest(read_log(fh), s.catalog)
    doc = report.to_dict()
    if args.propose:
        doc["proposed_tests"] = [description_to_dict(d) for d in propose_tests(report, s.catalog)]
    _emit(_json_bytes(doc), args.out)
    return EXIT_OK


COMMANDS = {
    "init": cmd_init,
    "coverage": cmd_coverage,
    "select": cmd_select,
    "import-results": cmd_import_results,
    "assess": cmd_assess,
    "report": cmd_report,
    "simulate": cmd_simulate,
    "monitor": cmd_monitor,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veritas", description="Independent AV safety-assessment engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--session", help="session file")
        p.add_argument("--out", help="write machine output here instead of stdout")
        return p

    p = add("init", "open a session from the applicant's catalog")
    p.add_argument("--catalog", required=True)
    p.add_argument("--session-id")

    p = add("coverage", "check that the test descriptions cover the test domain")
    p.add_argument("--catalog", help="revised catalog (derive-tests phase only)")

    p = add("select", "select tests for physical assessment")
    p.add_argument("--results", help="applicant results file (veritas-results/1)")
    p.add_argument("--policy")
    p.add_argument("--seed", type=int)

    p = add("import-results", "import the assessor's results")
    p.add_argument("--results", help="assessor results file (veritas-results/1)")

    p = add("assess", "assess every test and account demerit points")
    p.add_argument("--severity-policy")
    p.add_argument("--starting-points", type=int, default=100)

    p = add("report", "issue the advice and render the results table")
    p.add_argument("--format", choices=[f.value for f in Format], default=Format.TEXT.value)

    p = add("simulate", "generate synthetic applicant or assessor results")
    p.add_argument("--catalog")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--role", choices=["applicant", "assessor"], default="applicant")
    p.add_argument("--bias", choices=[b.value for b in BiasMode], default=BiasMode.TRUTHFUL.value)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--margin", type=float, default=2.0)
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--omit", help="comma-separated test ids the applicant leaves unreported")

    p = add("monitor", "ingest a monitored-deployment drive log")
    p.add_argument("--log")
    p.add_argument("--propose", action="store_true", help="include draft test descriptions")
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return COMMANDS[args.command](args)
    except (VeritasError, UsageError, OSError, ValueError) as exc:
        print(f"veritas {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
