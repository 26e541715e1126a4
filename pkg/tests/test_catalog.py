import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_test, three_of_four_catalog
from veritas.catalog import (
    Catalog,
    OddModel,
    TestDomain,
    check_coverage,
    combination,
    dump_catalog,
    load_catalog,
    validate_description,
)
from veritas.errors import DuplicateIdError, SchemaError, ValidationError
from veritas.rating import Direction

from conftest import fixture_bytes


def _doc():
    return json.loads(fixture_bytes("golden_catalog.json"))


def test_load_golden_catalog(golden_catalog):
    assert len(golden_catalog.tests) == 14
    assert golden_catalog.ids[0] == "1.1" and golden_catalog.ids[-1] == "4.3"
    assert {t.group for t in golden_catalog.tests} == {1, 2, 3, 4}


def test_non_monotone_references_rejected():
    doc = _doc()
    doc["tests"][0]["references"] = {"acceptable": 2.0, "fair": 1.5, "good": 1.0}
    with pytest.raises(ValidationError) as exc:
        load_catalog(json.dumps(doc))
    assert exc.value.test_id == "1.1" and exc.value.field == "references"


def test_empty_test_list_rejected():
    doc = _doc()
    doc["tests"] = []
    with pytest.raises(ValidationError):
        load_catalog(json.dumps(doc))


def test_duplicate_id_rejected():
    doc = _doc()
    doc["tests"][1]["id"] = "1.1"
    with pytest.raises(DuplicateIdError):
        load_catalog(json.dumps(doc))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("schema"),
        lambda d: d.update(schema="veritas-catalog/2"),
        lambda d: d.pop("odd"),
        lambda d: d["tests"][0].pop("direction"),
        lambda d: d["tests"][0].update(direction="sideways"),
        lambda d: d["tests"][0]["references"].update(good="2.0"),
    ],
)
def test_malformed_documents_raise_schema_error(mutate):
    doc = _doc()
    mutate(doc)
    with pytest.raises(SchemaError):
        load_catalog(json.dumps(doc))


def test_not_json_is_schema_error():
    with pytest.raises(SchemaError):
        load_catalog(b"odd: [")


def test_bad_id_and_unknown_domain_value_rejected():
    doc = _doc()
    doc["tests"][0]["id"] = "1"
    with pytest.raises(ValidationError):
        load_catalog(json.dumps(doc))
    doc = _doc()
    doc["domain"]["required_combinations"].append({"lighting": "fog"})
    with pytest.raises(ValidationError):
        load_catalog(json.dumps(doc))


def test_odd_model_invariants():
    with pytest.raises(ValidationError):
        OddModel(())
    with pytest.raises(ValidationError):
        OddModel.from_mapping({"lighting": ["day", "day"]})
    with pytest.raises(ValidationError):
        OddModel.from_mapping({"lighting": []})


def test_validate_description_examples():
    odd = OddModel.from_mapping({"lighting": ["day", "night"]})
    assert validate_description(make_test("1.1", {"lighting": "day"}), odd) == []
    problems = validate_description(make_test("1.1", {"weather": "rain"}), odd)
    assert [p.code for p in problems] == ["UnknownDimension"]
    assert problems[0].field == "tags.weather"
    assert validate_description(make_test("1.1", {}, refs=(1.0, 1.0, 1.0)), odd) == []
    lower = make_test("1.1", {}, refs=(1.0, 1.5, 2.0), direction=Direction.LOWER_IS_BETTER)
    assert [p.code for p in validate_description(lower, odd)] == ["NonMonotoneReferences"]


def test_round_trip(golden_catalog):
    data = dump_catalog(golden_catalog)
    assert load_catalog(data) == golden_catalog
    assert dump_catalog(load_catalog(data)) == data


def test_coverage_three_of_four():
    report = check_coverage(three_of_four_catalog())
    assert report.verdict == "NotOk"
    assert report.missing == {combination({"lighting": "night", "maneuver": "braking"})}
    assert len(report.covered) == 3


def test_coverage_empty_domain_is_ok():
    cat = three_of_four_catalog()
    cat = Catalog(cat.odd, cat.tests, TestDomain())
    report = check_coverage(cat)
    assert report.verdict == "Ok" and not report.covered and not report.missing


def test_partial_combination_covered_by_any_matching_test():
    cat = three_of_four_catalog()
    cat = Catalog(cat.odd, cat.tests, TestDomain(frozenset({combination({"lighting": "night"})})))
    assert check_coverage(cat).ok


def test_golden_catalog_covers_its_domain(golden_catalog):
    assert check_coverage(golden_catalog).ok


# -- brute-force coverage oracle ----------------------------------------------


def brute_force_missing(odd_dims, tests_tags, combos):
    """Enumerate combinations x tests x ODD dimensions; no shared code with check_coverage."""
    missing = []
    for combo in combos:
        found = False
        for tags in tests_tags:
            match = True
            for name, _values in odd_dims:
                if name in combo and tags.get(name) != combo[name]:
                    match = False
                    break
            if match:
                found = True
                break
        if not found:
            missing.append(combo)
    return missing


@st.composite
def coverage_instances(draw):
    n_dims = draw(st.integers(1, 5))
    dims = [(f"d{i}", [f"v{j}" for j in range(draw(st.integers(1, 4)))]) for i in range(n_dims)]

    def partial_assignment():
        return st.fixed_dictionaries(
            {}, optional={name: st.sampled_from(values) for name, values in dims}
        )

    tests_tags = draw(st.lists(partial_assignment(), min_size=1, max_size=8))
    combos = draw(st.lists(partial_assignment(), max_size=10))
    return dims, tests_tags, combos


def build_catalog(dims, tests_tags, combos):
    odd = OddModel.from_mapping(dict(dims))
    tests = tuple(make_test(f"1.{i + 1}", tags) for i, tags in enumerate(tests_tags))
    return Catalog(odd, tests, TestDomain(frozenset(combination(c) for c in combos)))


@settings(max_examples=300, deadline=None)
@given(coverage_instances())
def test_coverage_matches_brute_force(instance):
    dims, tests_tags, combos = instance
    report = check_coverage(build_catalog(*instance))
    expected_missing = {combination(c) for c in brute_force_missing(dims, tests_tags, combos)}
    assert report.missing == expected_missing
    assert report.covered | report.missing == {combination(c) for c in combos}
    assert not report.covered & report.missing
    assert report.ok == (not expected_missing)
