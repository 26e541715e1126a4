"""Synthetic AV capability and the results an applicant and assessor would report.

Every draw comes from a Philox counter-based generator keyed on
(seed, stream, test id), so a test's values do not depend on which other
tests are simulated or in what order.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .catalog import Catalog, TestDescription
from .rating import Direction, MetricValue, classify
from .results import ApplicantReport, AssessorReport, Method, ResultEntry
from .selection import SelectionDecision, selected_ids


def keyed_generator(seed: int, stream: str, test_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{stream}:{test_id}".encode("utf-8")).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


def keyed_normal(seed: int, stream: str, test_id: str) -> float:
    """One standard-normal draw for (seed, stream, test_id)."""
    return float(keyed_generator(seed, stream, test_id).standard_normal())


@dataclass(frozen=True)
class TestCapability:
    __test__ = False

    true_metric: float
    measurement_noise_sd: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.measurement_noise_sd) or self.measurement_noise_sd < 0:
            raise ValueError("measurement noise sd must be finite and non-negative")


@dataclass(frozen=True)
class CapabilityProfile:
    catalog: Catalog
    capabilities: Mapping[str, TestCapability]

    def __post_init__(self) -> None:
        if set(self.capabilities) != set(self.catalog.ids):
            raise ValueError("a capability profile needs exactly one entry per catalog test")


class BiasMode(str, Enum):
    TRUTHFUL = "truthful"
    WORST_CASE = "worst_case"
    OPTIMISTIC = "optimistic"


@dataclass(frozen=True)
class ReportingBias:
    """How the applicant turns true capability into a reported value.

    ``WORST_CASE`` reports the true metric moved ``margin`` noise standard
    deviations toward worse; ``OPTIMISTIC`` moves it ``delta`` metric units
    toward better.
    """

    mode: BiasMode = BiasMode.TRUTHFUL
    delta: float = 0.0
    margin: float = 2.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise ValueError("optimistic delta must be finite and non-negative")
        if not (math.isfinite(self.margin) and self.margin >= 0):
            raise ValueError("worst-case margin must be finite and non-negative")

    @classmethod
    def truthful(cls) -> "ReportingBias":
        return cls(BiasMode.TRUTHFUL)

    @classmethod
    def worst_case(cls, margin: float = 2.0) -> "ReportingBias":
        return cls(BiasMode.WORST_CASE, margin=margin)

    @classmethod
    def optimistic(cls, delta: float) -> "ReportingBias":
        return cls(BiasMode.OPTIMISTIC, delta=delta)

    def reported(self, cap: TestCapability, direction: Direction) -> float:
        sign = 1.0 if direction is Direction.HIGHER_IS_BETTER else -1.0
        if self.mode is BiasMode.OPTIMISTIC:
            return cap.true_metric + sign * self.delta
        if self.mode is BiasMode.WORST_CASE:
            return cap.true_metric - sign * self.margin * cap.measurement_noise_sd
        return cap.true_metric


def metric_range(test: TestDescription) -> tuple[float, float]:
    """Interval the true metric is drawn from: one band width beyond each end reference."""
    acceptable, _, good = test.references
    w = good - acceptable
    lo, hi = acceptable - w, good + w
    return (lo, hi) if lo <= hi else (hi, lo)


def gen_profile(
    catalog: Catalog, seed: int, noise_sd: float | Mapping[str, float] = 0.0
) -> CapabilityProfile:
    caps = {}
    for t in catalog.tests:
        lo, hi = metric_range(t)
        u = float(keyed_generator(seed, "profile", t.id).random())
        sd = noise_sd.get(t.id, 0.0) if isinstance(noise_sd, Mapping) else noise_sd
        caps[t.id] = TestCapability(lo + (hi - lo) * u, float(sd))
    return CapabilityProfile(catalog, caps)


def simulate_applicant(
    profile: CapabilityProfile,
    bias: ReportingBias = ReportingBias(),
    seed: int = 0,
    omit: Iterable[str] = (),
) -> ApplicantReport:
    """Applicant ratings from its own (virtual) testing; ``omit`` leaves tests unreported.

    The applicant's value carries no noise, so ``seed`` is accepted for
    interface symmetry and does not change the result.
    """
    skip = set(omit)
    entries = {}
    for t in profile.catalog.tests:
        if t.id in skip:
            continue
        value = bias.reported(profile.capabilities[t.id], t.direction)
        entries[t.id] = ResultEntry(classify(value, t.references, t.direction), MetricValue(value, t.unit), Method.VIRTUAL)
    return ApplicantReport(entries)


def assessor_measurement(profile: CapabilityProfile, test_id: str, seed: int) -> float:
    cap = profile.capabilities[test_id]
    if cap.measurement_noise_sd == 0:
        return cap.true_metric
    return cap.true_metric + cap.measurement_noise_sd * keyed_normal(seed, "assessor", test_id)


def simulate_assessor(
    profile: CapabilityProfile, selection: Iterable[SelectionDecision] | Iterable[str], seed: int
) -> AssessorReport:
    items = list(selection)
    ids = items if all(isinstance(s, str) for s in items) else selected_ids(items)
    entries = {}
    for tid in ids:
        t = profile.catalog.get(tid)
        value = assessor_measurement(profile, tid, seed)
        entries[tid] = ResultEntry(classify(value, t.references, t.direction), MetricValue(value, t.unit), Method.PHYSICAL)
    return AssessorReport(entries)
