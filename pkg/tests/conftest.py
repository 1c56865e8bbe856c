import re
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
_criteria: dict[int, tuple[str, str]] = {}


@pytest.fixture
def dummy_path() -> Path:
    return ROOT / "scenarios" / "dummy.scn"


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    number, name = int(m.group(1)), m.group(2).replace("_", " ")
    if report.when == "call" or report.outcome != "passed":
        _criteria[number] = (name, "PASS" if report.outcome == "passed" else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        name, verdict = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {verdict}  {name}")
