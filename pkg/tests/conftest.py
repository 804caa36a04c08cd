import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from phasecomp.source import SourceModel  # noqa: E402


@pytest.fixture
def model():
    return SourceModel()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
