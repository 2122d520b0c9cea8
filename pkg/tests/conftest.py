import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from budgex.graph import toy_graph  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture
def toy():
    return toy_graph(p=0.5)


@pytest.fixture
def acceptance_report():
    def record(number, name, passed, detail=""):
        ACCEPTANCE_LINES.append((number, name, passed, detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE_LINES):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {name}  {detail}")
