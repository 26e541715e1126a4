from pathlib import Path

import pytest

from veritas.catalog import load_catalog
from veritas.results import load_applicant_report, load_assessor_report
from veritas.selection import load_policy

FIXTURES = Path(__file__).parent / "fixtures"

# Golden results table: applicant rating, assessor rating
# (None when not performed), fidelity, P/F, NC/OB marks.
GOLDEN_ROWS = [
    ("1.1", "good", "good", "P", "P", "-"),
    ("1.2", "fair", None, "P", "P", "-"),
    ("1.3", "fair", None, "P", "P", "-"),
    ("1.4", "acceptable", None, "P", "P", "NC"),
    ("2.1", "good", None, "P", "P", "-"),
    ("2.2", "good", "fair", "X", "P", "NC"),
    ("2.3", "fair", None, "P", "P", "-"),
    ("2.4", "fair", "fair", "P", "P", "OB"),
    ("3.1", "fair", "acceptable", "X", "P", "NC"),
    ("3.2", "fair", "good", "P", "P", "-"),
    ("3.3", "fail", None, "P", "X", "-"),
    ("4.1", "fair", None, "P", "P", "-"),
    ("4.2", "acceptable", None, "P", "P", "NC"),
    ("4.3", "acceptable", "fail", "X", "X", "-"),
]


def fixture_bytes(name: str) -> bytes:
    return (FIXTURES / name).read_bytes()


@pytest.fixture(scope="session")
def golden_catalog():
    return load_catalog(fixture_bytes("golden_catalog.json"))


@pytest.fixture(scope="session")
def golden_applicant():
    return load_applicant_report(fixture_bytes("golden_applicant.json"))


@pytest.fixture(scope="session")
def golden_assessor():
    return load_assessor_report(fixture_bytes("golden_assessor.json"))


@pytest.fixture(scope="session")
def golden_policy():
    return load_policy(fixture_bytes("golden_policy.json"))


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


# -- acceptance reporting -----------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        _ACCEPTANCE[number] = (title, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
