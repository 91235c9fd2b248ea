import pytest

from sleepytob.core import Log
from sleepytob.scenario import Scenario


def chain(*ids):
    """Log genesis -> ids..."""
    return Log((0,) + ids)


@pytest.fixture
def honest_tob1():
    return Scenario(n=10, delta=4, protocol="TOB1", horizon=800)


@pytest.fixture
def honest_tob2():
    return Scenario(n=10, delta=4, protocol="TOB2", horizon=1000)


# -- acceptance summary: one PASS/FAIL line per criterion ---------------------------------

_criteria: dict = {}
_criterion_of: dict = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            number, label = mark.args
            _criterion_of[item.nodeid] = number
            _criteria.setdefault(number, {"label": label, "outcomes": []})


def pytest_runtest_logreport(report):
    number = _criterion_of.get(report.nodeid)
    if number is None:
        return
    if report.when == "call" or report.outcome != "passed":
        _criteria[number]["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        outcomes = entry["outcomes"]
        verdict = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        if not outcomes:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {entry['label']}")
