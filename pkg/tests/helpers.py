"""Builders shared by several test modules."""

from veritas.catalog import Catalog, OddModel, TestCase, TestDescription, TestDomain, combination
from veritas.rating import Direction, References


def make_test(test_id, tags, refs=(1.0, 1.5, 2.0), direction=Direction.HIGHER_IS_BETTER, unit="s"):
    return TestDescription(
        id=test_id,
        criterion="keeps a safe gap",
        test_case=TestCase("scenario"),
        metric_id="ttc",
        unit=unit,
        direction=direction,
        references=References(*refs),
        tags=dict(tags),
    )


def three_of_four_catalog():
    """Domain {day, night} x {cut_in, braking}; tests cover all but (night, braking)."""
    odd = OddModel.from_mapping({"lighting": ["day", "night"], "maneuver": ["cut_in", "braking"]})
    tests = (
        make_test("1.1", {"lighting": "day", "maneuver": "cut_in"}),
        make_test("1.2", {"lighting": "day", "maneuver": "braking"}),
        make_test("2.1", {"lighting": "night", "maneuver": "cut_in"}),
    )
    domain = TestDomain(
        frozenset(
            combination({"lighting": l, "maneuver": m}) for l in ("day", "night") for m in ("cut_in", "braking")
        )
    )
    return Catalog(odd, tests, domain)
