"""Four-level ordinal rating of a metric value against three references."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import NamedTuple

from .errors import NonFiniteValue, UnitMismatch


class Rating(IntEnum):
    FAIL = 0
    ACCEPTABLE = 1
    FAIR = 2
    GOOD = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str) -> "Rating":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown rating {text!r}") from None


class Direction(str, Enum):
    HIGHER_IS_BETTER = "higher_is_better"
    LOWER_IS_BETTER = "lower_is_better"

    def at_least_as_good(self, a: float, b: float) -> bool:
        """True when ``a`` is at least as good as ``b`` under this direction."""
        return a >= b if self is Direction.HIGHER_IS_BETTER else a <= b


class Comparison(str, Enum):
    WORSE = "worse"
    EQUAL = "equal"
    BETTER = "better"


class References(NamedTuple):
    acceptable: float
    fair: float
    good: float

    def is_monotone(self, direction: Direction) -> bool:
        ok = direction.at_least_as_good
        return ok(self.fair, self.acceptable) and ok(self.good, self.fair)


@dataclass(frozen=True)
class MetricValue:
    value: float
    unit: str


def _value_of(value: MetricValue | float, unit: str | None) -> float:
    if isinstance(value, MetricValue):
        if unit is not None and value.unit != unit:
            raise UnitMismatch(f"expected unit {unit!r}, got {value.unit!r}")
        raw = value.value
    else:
        raw = value
    raw = float(raw)
    if not math.isfinite(raw):
        raise NonFiniteValue(f"metric value {raw!r} is not finite")
    return raw


def classify(
    value: MetricValue | float,
    references: References | tuple[float, float, float],
    direction: Direction,
    unit: str | None = None,
) -> Rating:
    """Rate ``value`` against (acceptable, fair, good) references.

    Meeting a reference exactly attains that band. ``unit`` is only checked
    when ``value`` is a :class:`MetricValue`.
    """
    v = _value_of(value, unit)
    acceptable, fair, good = references
    ok = direction.at_least_as_good
    if ok(v, good):
        return Rating.GOOD
    if ok(v, fair):
        return Rating.FAIR
    if ok(v, acceptable):
        return Rating.ACCEPTABLE
    return Rating.FAIL


def compare(a: Rating, b: Rating) -> Comparison:
    if a < b:
        return Comparison.WORSE
    if a > b:
        return Comparison.BETTER
    return Comparison.EQUAL
