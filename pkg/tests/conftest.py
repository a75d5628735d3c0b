import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SPECS = Path(__file__).resolve().parent.parent / "specs"

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def specs_dir() -> Path:
    return SPECS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
