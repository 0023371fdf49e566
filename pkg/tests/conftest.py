import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fluxq.circuit import load_preset  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def sample_a():
    return load_preset("sample_A")


@pytest.fixture(scope="session")
def sample_b():
    return load_preset("sample_B")


@pytest.fixture(scope="session")
def record_criterion():
    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(ACCEPTANCE_LINES[-1])

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# outcomes of every test, consumed by the property-suite acceptance check
SESSION: dict = {"start": None, "outcomes": {}}


def pytest_sessionstart(session):
    SESSION["start"] = time.perf_counter()


def pytest_collection_modifyitems(items):
    # acceptance criteria run last so the property-suite check can see the rest
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


def pytest_runtest_logreport(report):
    outcomes = SESSION["outcomes"]
    if report.when == "call" or report.outcome != "passed":
        if hasattr(report, "wasxfail"):
            outcomes[report.nodeid] = "xfailed" if report.skipped else "xpassed"
        elif outcomes.get(report.nodeid) != "failed":
            outcomes[report.nodeid] = report.outcome
