"""Applicant and assessor result sets and their ``veritas-results/1`` files."""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Any

from .errors import SchemaError
from .rating import MetricValue, Rating

RESULTS_SCHEMA = "veritas-results/1"


class Method(str, Enum):
    VIRTUAL = "virtual"
    PHYSICAL = "physical"
    HARDWARE_IN_LOOP = "hardware_in_loop"


@dataclass(frozen=True)
class ResultEntry:
    rating: Rating
    raw: MetricValue | None = None
    method: Method = Method.VIRTUAL


@dataclass(frozen=True)
class Observation:
    test_id: str
    note: str


@dataclass(frozen=True)
class ApplicantReport:
    entries: Mapping[str, ResultEntry] = field(default_factory=dict)

    def get(self, test_id: str) -> ResultEntry | None:
        return self.entries.get(test_id)


@dataclass(frozen=True)
class AssessorReport:
    entries: Mapping[str, ResultEntry] = field(default_factory=dict)
    observations: tuple[Observation, ...] = ()

    def get(self, test_id: str) -> ResultEntry | None:
        return self.entries.get(test_id)

    def notes_for(self, test_id: str) -> list[str]:
        return [o.note for o in self.observations if o.test_id == test_id]


def _entry_to_dict(test_id: str, e: ResultEntry) -> dict[str, Any]:
    return {
        "test_id": test_id,
        "rating": e.rating.label,
        "raw": None if e.raw is None else {"value": e.raw.value, "unit": e.raw.unit},
        "method": e.method.value,
    }


def _entries_from(rows: Any) -> dict[str, ResultEntry]:
    if not isinstance(rows, list):
        raise SchemaError("results must be a list")
    out: dict[str, ResultEntry] = {}
    for i, row in enumerate(rows):
        if not isinstance(row, Mapping) or "test_id" not in row or "rating" not in row:
            raise SchemaError(f"results[{i}] needs test_id and rating")
        test_id = str(row["test_id"])
        if test_id in out:
            raise SchemaError(f"results[{i}]: duplicate entry for test {test_id}")
        try:
            rating = Rating.parse(row["rating"])
            method = Method(row.get("method", Method.VIRTUAL.value))
        except (ValueError, AttributeError) as exc:
            raise SchemaError(f"results[{i}]: {exc}") from None
        raw = row.get("raw")
        if raw is not None:
            if not isinstance(raw, Mapping) or "value" not in raw:
                raise SchemaError(f"results[{i}].raw needs a value")
            raw = MetricValue(float(raw["value"]), str(raw.get("unit", "")))
        out[test_id] = ResultEntry(rating, raw, method)
    return out


def applicant_to_dict(report: ApplicantReport) -> dict[str, Any]:
    return {
        "schema": RESULTS_SCHEMA,
        "source": "applicant",
        "results": [_entry_to_dict(k, report.entries[k]) for k in sorted(report.entries)],
    }


def assessor_to_dict(report: AssessorReport) -> dict[str, Any]:
    return {
        "schema": RESULTS_SCHEMA,
        "source": "assessor",
        "results": [_entry_to_dict(k, report.entries[k]) for k in sorted(report.entries)],
        "observations": [{"test_id": o.test_id, "note": o.note} for o in report.observations],
    }


def _check_schema(doc: Any) -> None:
    if not isinstance(doc, Mapping) or doc.get("schema") != RESULTS_SCHEMA:
        raise SchemaError(f"results document must declare schema {RESULTS_SCHEMA!r}")


def applicant_from_dict(doc: Mapping[str, Any]) -> ApplicantReport:
    _check_schema(doc)
    return ApplicantReport(_entries_from(doc.get("results", [])))


def assessor_from_dict(doc: Mapping[str, Any]) -> AssessorReport:
    _check_schema(doc)
    obs = []
    for i, o in enumerate(doc.get("observations") or []):
        if not isinstance(o, Mapping) or "test_id" not in o:
            raise SchemaError(f"observations[{i}] needs a test_id")
        obs.append(Observation(str(o["test_id"]), str(o.get("note", ""))))
    return AssessorReport(_entries_from(doc.get("results", [])), tuple(obs))


def _read_json(source: bytes | str | IO) -> Any:
    if hasattr(source, "read"):
        source = source.read()
    try:
        return json.loads(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc


def load_applicant_report(source: bytes | str | IO) -> ApplicantReport:
    return applicant_from_dict(_read_json(source))


def load_assessor_report(source: bytes | str | IO) -> AssessorReport:
    return assessor_from_dict(_read_json(source))


def dump_results(report: ApplicantReport | AssessorReport) -> bytes:
    doc = assessor_to_dict(report) if isinstance(report, AssessorReport) else applicant_to_dict(report)
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
