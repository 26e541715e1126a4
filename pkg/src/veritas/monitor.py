"""Monitored deployment: ingest drive logs, find untested conditions, draft tests."""

from __future__ import annotations

import json
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Any

from .catalog import (
    Catalog,
    Combination,
    TestCase,
    TestDescription,
    TestDomain,
    combination,
    combination_key,
    consistent,
)
from .errors import MalformedRecord
from .rating import Direction, References

DRIVELOG_SCHEMA = "veritas-drivelog/1"


class DriveEvent(str, Enum):
    NOMINAL = "nominal"
    DISENGAGEMENT = "disengagement"
    SAFETY_EVENT = "safety_event"


@dataclass(frozen=True)
class DriveLogRecord:
    timestamp: int
    observed_tags: Mapping[str, str]
    event: DriveEvent = DriveEvent.NOMINAL
    annotation: str = ""


@dataclass(frozen=True)
class MonitorReport:
    novel_combinations: frozenset = frozenset()
    # (dimension, value) pairs the ODD model does not know, dimension included
    novel_values: frozenset = frozenset()
    event_counts: Mapping[Combination, Mapping[DriveEvent, int]] = field(default_factory=dict)
    records: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "novel_combinations": [dict(combination_key(c)) for c in sorted(self.novel_combinations, key=combination_key)],
            "novel_values": [[d, v] for d, v in sorted(self.novel_values)],
            "event_counts": [
                {"combination": dict(combination_key(c)), "counts": {e.value: n for e, n in sorted(counts.items())}}
                for c, counts in sorted(self.event_counts.items(), key=lambda kv: combination_key(kv[0]))
            ],
            "records": self.records,
        }


def parse_record(line: str, lineno: int) -> DriveLogRecord:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"not valid JSON ({exc.msg})", lineno) from None
    if not isinstance(raw, Mapping):
        raise MalformedRecord("record must be an object", lineno)
    ts = raw.get("timestamp")
    if isinstance(ts, bool) or not isinstance(ts, int):
        raise MalformedRecord("timestamp must be integer UTC seconds", lineno)
    tags = raw.get("observed_tags", {})
    if not isinstance(tags, Mapping) or not all(isinstance(v, str) for v in tags.values()):
        raise MalformedRecord("observed_tags must map dimension names to string values", lineno)
    try:
        event = DriveEvent(raw.get("event", DriveEvent.NOMINAL.value))
    except ValueError:
        raise MalformedRecord(f"unknown event {raw.get('event')!r}", lineno) from None
    return DriveLogRecord(ts, dict(tags), event, str(raw.get("annotation", "")))


def _header_or_record(line: str, lineno: int) -> DriveLogRecord | None:
    if lineno == 1:
        try:
            head = json.loads(line)
        except json.JSONDecodeError:
            head = None
        if isinstance(head, Mapping) and "schema" in head:
            if head["schema"] != DRIVELOG_SCHEMA:
                raise MalformedRecord(f"schema must be {DRIVELOG_SCHEMA!r}", lineno)
            return None
    return parse_record(line, lineno)


def read_log(stream: Iterable[str] | IO) -> list[DriveLogRecord]:
    """Parse a line-delimited drive log; an optional first line may carry the schema header."""
    records: list[DriveLogRecord] = []
    last_ts = None
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        rec = _header_or_record(line, lineno)
        if rec is None:
            continue
        if last_ts is not None and rec.timestamp < last_ts:
            raise MalformedRecord("timestamps must not decrease", lineno)
        last_ts = rec.timestamp
        records.append(rec)
    return records


def known_part(tags: Mapping[str, str], catalog: Catalog) -> Combination:
    return combination((d, v) for d, v in tags.items() if catalog.odd.knows(d, v))


def is_exercised(combo: Combination, catalog: Catalog) -> bool:
    return any(consistent(t.tags, combo) for t in catalog.tests)


def ingest(log: Iterable[str] | IO | Iterable[DriveLogRecord], catalog: Catalog) -> MonitorReport:
    """Summarise a drive log against what the catalog's tests exercise."""
    items = list(log)
    records = items if all(isinstance(r, DriveLogRecord) for r in items) else read_log(items)
    novel, novel_values = set(), set()
    counts: dict[Combination, Counter] = {}
    for rec in records:
        for d, v in rec.observed_tags.items():
            if not catalog.odd.knows(d, v):
                novel_values.add((d, v))
        combo = known_part(rec.observed_tags, catalog)
        counts.setdefault(combo, Counter())[rec.event] += 1
        if combo and not is_exercised(combo, catalog):
            novel.add(combo)
    return MonitorReport(
        frozenset(novel),
        frozenset(novel_values),
        {c: dict(n) for c, n in counts.items()},
        len(records),
    )


def propose_tests(report: MonitorReport, catalog: Catalog) -> list[TestDescription]:
    """One non-executable draft per novel combination, numbered in a new group."""
    group = max(t.group for t in catalog.tests) + 1
    drafts = []
    for i, combo in enumerate(sorted(report.novel_combinations, key=combination_key), start=1):
        conditions = ", ".join(f"{d}={v}" for d, v in combination_key(combo))
        drafts.append(
            TestDescription(
                id=f"{group}.{i}",
                criterion=f"The AV handles conditions observed in deployment: {conditions}",
                test_case=TestCase(f"Scenario reproducing monitored conditions {conditions}"),
                metric_id="unassigned",
                unit="",
                direction=Direction.HIGHER_IS_BETTER,
                references=None,
                tags=dict(combination_key(combo)),
            )
        )
    return drafts


def author_references(
    draft: TestDescription,
    references: References | tuple[float, float, float],
    direction: Direction,
    metric_id: str,
    unit: str = "",
) -> TestDescription:
    """Make a draft executable once a person has chosen its metric and references."""
    return replace(draft, references=References(*references), direction=direction, metric_id=metric_id, unit=unit)


def extend_catalog(catalog: Catalog, tests: Iterable[TestDescription], domain: TestDomain | None = None) -> Catalog:
    return Catalog(catalog.odd, (*catalog.tests, *tests), domain or catalog.domain)
