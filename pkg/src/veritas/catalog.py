"""Test catalog: ODD model, test descriptions, test domain and coverage."""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import IO, Any

from .errors import DuplicateIdError, SchemaError, ValidationError
from .rating import Direction, References

CATALOG_SCHEMA = "veritas-catalog/1"
TEST_ID_RE = re.compile(r"[0-9]+(\.[0-9]+)+")

# A (partial) assignment over ODD dimensions, e.g. {("lighting", "night")}.
Combination = frozenset  # frozenset[tuple[str, str]]


def id_sort_key(test_id: str) -> tuple[int, ...]:
    """Numeric sort key so that 2.10 orders after 2.9."""
    return tuple(int(p) for p in test_id.split(".") if p.isdigit())


def combination(tags: Mapping[str, str] | Iterable[tuple[str, str]]) -> Combination:
    items = tags.items() if isinstance(tags, Mapping) else tags
    return frozenset((str(k), str(v)) for k, v in items)


def combination_key(combo: Combination) -> tuple[tuple[str, str], ...]:
    """Canonical sort key / serialisable form of a combination."""
    return tuple(sorted(combo))


def consistent(tags: Mapping[str, str], combo: Combination) -> bool:
    """True if ``tags`` equals ``combo`` on every dimension ``combo`` constrains."""
    return all(tags.get(dim) == value for dim, value in combo)


@dataclass(frozen=True)
class Dimension:
    name: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class OddModel:
    dimensions: tuple[Dimension, ...]

    def __post_init__(self) -> None:
        if not self.dimensions:
            raise ValidationError("ODD model needs at least one dimension", field="odd.dimensions")
        seen = set()
        for dim in self.dimensions:
            if dim.name in seen:
                raise ValidationError(f"duplicate dimension {dim.name!r}", field="odd.dimensions")
            seen.add(dim.name)
            if not dim.values:
                raise ValidationError(f"dimension {dim.name!r} has no values", field="odd.dimensions")
            if len(set(dim.values)) != len(dim.values):
                raise ValidationError(f"duplicate value in dimension {dim.name!r}", field="odd.dimensions")

    @classmethod
    def from_mapping(cls, dims: Mapping[str, Iterable[str]]) -> "OddModel":
        return cls(tuple(Dimension(name, tuple(values)) for name, values in dims.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)

    def values_of(self, name: str) -> tuple[str, ...] | None:
        for d in self.dimensions:
            if d.name == name:
                return d.values
        return None

    def knows(self, name: str, value: str) -> bool:
        values = self.values_of(name)
        return values is not None and value in values


@dataclass(frozen=True)
class Parameter:
    value: float | str
    unit: str = ""


@dataclass(frozen=True)
class TestCase:
    description: str
    parameters: Mapping[str, Parameter] = field(default_factory=dict)


@dataclass(frozen=True)
class TestDescription:
    """One assessable test.

    ``references`` is ``None`` only for drafts proposed from monitored
    deployment; such descriptions are not executable.
    """

    __test__ = False  # not a pytest class

    id: str
    criterion: str
    test_case: TestCase
    metric_id: str
    unit: str
    direction: Direction
    references: References | None
    tags: Mapping[str, str] = field(default_factory=dict)
    ddt_task: str = ""

    @property
    def executable(self) -> bool:
        return self.references is not None

    @property
    def combination(self) -> Combination:
        return combination(self.tags)

    @property
    def group(self) -> int:
        return int(self.id.split(".")[0])


@dataclass(frozen=True)
class Violation:
    code: str
    field: str
    message: str


def validate_description(desc: TestDescription, odd: OddModel) -> list[Violation]:
    """Return every invariant the description breaks; empty when valid."""
    out: list[Violation] = []
    if not TEST_ID_RE.fullmatch(desc.id):
        out.append(Violation("BadId", "id", f"id {desc.id!r} does not match group.index form"))
    if not desc.metric_id:
        out.append(Violation("MissingMetric", "metric_id", "metric_id is empty"))
    if desc.references is None:
        out.append(Violation("UnsetReferences", "references", "references have not been authored"))
    else:
        if not all(math.isfinite(r) for r in desc.references):
            out.append(Violation("NonFiniteReference", "references", "references must be finite"))
        elif not desc.references.is_monotone(desc.direction):
            out.append(
                Violation(
                    "NonMonotoneReferences",
                    "references",
                    f"acceptable/fair/good {tuple(desc.references)} not ordered for {desc.direction.value}",
                )
            )
    for dim, value in desc.tags.items():
        values = odd.values_of(dim)
        if values is None:
            out.append(Violation("UnknownDimension", f"tags.{dim}", f"dimension {dim!r} not in the ODD model"))
        elif value not in values:
            out.append(Violation("UnknownValue", f"tags.{dim}", f"value {value!r} not in dimension {dim!r}"))
    return out


@dataclass(frozen=True)
class TestDomain:
    __test__ = False

    required_combinations: frozenset = frozenset()  # frozenset[Combination]


@dataclass(frozen=True)
class Catalog:
    odd: OddModel
    tests: tuple[TestDescription, ...]
    domain: TestDomain = TestDomain()

    def __post_init__(self) -> None:
        if not self.tests:
            raise ValidationError("catalog has no tests", field="tests")
        seen: set[str] = set()
        for t in self.tests:
            if t.id in seen:
                raise DuplicateIdError(f"duplicate test id {t.id!r}", test_id=t.id, field="id")
            seen.add(t.id)
            problems = validate_description(t, self.odd)
            if problems:
                p = problems[0]
                raise ValidationError(f"{p.code}: {p.message}", test_id=t.id, field=p.field)
        for combo in self.domain.required_combinations:
            for dim, value in combo:
                if not self.odd.knows(dim, value):
                    raise ValidationError(
                        f"domain combination uses unknown {dim}={value}", field="domain.required_combinations"
                    )

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tests)

    def get(self, test_id: str) -> TestDescription:
        for t in self.tests:
            if t.id == test_id:
                return t
        raise KeyError(test_id)

    def __contains__(self, test_id: object) -> bool:
        return any(t.id == test_id for t in self.tests)

    def digest(self) -> str:
        return hashlib.sha256(dump_catalog(self)).hexdigest()


@dataclass(frozen=True)
class CoverageReport:
    covered: frozenset
    missing: frozenset

    @property
    def ok(self) -> bool:
        return not self.missing

    @property
    def verdict(self) -> str:
        return "Ok" if self.ok else "NotOk"


def check_coverage(catalog: Catalog) -> CoverageReport:
    covered, missing = set(), set()
    for combo in catalog.domain.required_combinations:
        if any(consistent(t.tags, combo) for t in catalog.tests):
            covered.add(combo)
        else:
            missing.add(combo)
    return CoverageReport(frozenset(covered), frozenset(missing))


# -- serialisation -----------------------------------------------------------


def _require(doc: Mapping[str, Any], key: str, where: str) -> Any:
    if not isinstance(doc, Mapping) or key not in doc:
        raise SchemaError(f"missing {where}.{key}" if where else f"missing {key}")
    return doc[key]


def _number(x: Any, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(f"{where} must be a decimal number")
    return float(x)


def _parse_test(raw: Mapping[str, Any], i: int) -> TestDescription:
    where = f"tests[{i}]"
    test_id = _require(raw, "id", where)
    if not isinstance(test_id, str):
        raise SchemaError(f"{where}.id must be a string")
    tc_raw = _require(raw, "test_case", where)
    if isinstance(tc_raw, str):
        test_case = TestCase(tc_raw)
    elif isinstance(tc_raw, Mapping):
        params = {}
        for name, p in (tc_raw.get("parameters") or {}).items():
            if isinstance(p, Mapping):
                params[name] = Parameter(_require(p, "value", f"{where}.test_case.parameters.{name}"), p.get("unit", ""))
            else:
                params[name] = Parameter(p)
        test_case = TestCase(str(tc_raw.get("description", "")), params)
    else:
        raise SchemaError(f"{where}.test_case must be text or an object")
    try:
        direction = Direction(_require(raw, "direction", where))
    except ValueError:
        raise SchemaError(f"{where}.direction must be one of {[d.value for d in Direction]}") from None
    refs_raw = raw.get("references")
    refs = None
    if refs_raw is not None:
        refs = References(
            *(_number(_require(refs_raw, k, f"{where}.references"), f"{where}.references.{k}") for k in References._fields)
        )
    tags = raw.get("tags") or {}
    if not isinstance(tags, Mapping):
        raise SchemaError(f"{where}.tags must be an object")
    return TestDescription(
        id=test_id,
        criterion=str(_require(raw, "criterion", where)),
        test_case=test_case,
        metric_id=str(_require(raw, "metric_id", where)),
        unit=str(raw.get("unit", "")),
        direction=direction,
        references=refs,
        tags={str(k): str(v) for k, v in tags.items()},
        ddt_task=str(raw.get("ddt_task", "")),
    )


def catalog_from_dict(doc: Mapping[str, Any]) -> Catalog:
    if not isinstance(doc, Mapping):
        raise SchemaError("catalog document must be an object")
    if doc.get("schema") != CATALOG_SCHEMA:
        raise SchemaError(f"schema must be {CATALOG_SCHEMA!r}, got {doc.get('schema')!r}")
    odd_raw = _require(doc, "odd", "")
    dims_raw = _require(odd_raw, "dimensions", "odd")
    if not isinstance(dims_raw, list):
        raise SchemaError("odd.dimensions must be a list")
    dims = []
    for j, d in enumerate(dims_raw):
        values = _require(d, "values", f"odd.dimensions[{j}]")
        if not isinstance(values, list):
            raise SchemaError(f"odd.dimensions[{j}].values must be a list")
        dims.append(Dimension(str(_require(d, "name", f"odd.dimensions[{j}]")), tuple(str(v) for v in values)))
    odd = OddModel(tuple(dims))
    tests_raw = _require(doc, "tests", "")
    if not isinstance(tests_raw, list):
        raise SchemaError("tests must be a list")
    tests = tuple(_parse_test(t, i) for i, t in enumerate(tests_raw))
    domain_raw = doc.get("domain") or {}
    combos_raw = domain_raw.get("required_combinations", []) if isinstance(domain_raw, Mapping) else None
    if not isinstance(combos_raw, list) or not all(isinstance(c, Mapping) for c in combos_raw):
        raise SchemaError("domain.required_combinations must be a list of objects")
    domain = TestDomain(frozenset(combination({str(k): str(v) for k, v in c.items()}) for c in combos_raw))
    return Catalog(odd, tests, domain)


def load_catalog(source: bytes | str | IO) -> Catalog:
    """Parse and validate a ``veritas-catalog/1`` JSON document."""
    if hasattr(source, "read"):
        source = source.read()
    try:
        doc = json.loads(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaError(f"catalog is not valid JSON: {exc}") from exc
    return catalog_from_dict(doc)


def description_to_dict(t: TestDescription) -> dict[str, Any]:
    return {
        "id": t.id,
        "criterion": t.criterion,
        "test_case": {
            "description": t.test_case.description,
            "parameters": {k: {"value": p.value, "unit": p.unit} for k, p in t.test_case.parameters.items()},
        },
        "metric_id": t.metric_id,
        "unit": t.unit,
        "direction": t.direction.value,
        "references": None if t.references is None else t.references._asdict(),
        "tags": dict(t.tags),
        "ddt_task": t.ddt_task,
    }


def catalog_to_dict(catalog: Catalog) -> dict[str, Any]:
    return {
        "schema": CATALOG_SCHEMA,
        "odd": {"dimensions": [{"name": d.name, "values": list(d.values)} for d in catalog.odd.dimensions]},
        "tests": [description_to_dict(t) for t in catalog.tests],
        "domain": {
            "required_combinations": [
                dict(combination_key(c)) for c in sorted(catalog.domain.required_combinations, key=combination_key)
            ]
        },
    }


def dump_catalog(catalog: Catalog) -> bytes:
    return (json.dumps(catalog_to_dict(catalog), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
