import sys
from pathlib import Path

import pytest

# shared oracle helpers live next to the tests
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def base_case_report():
    """The full base-case scan is slow; compute it once per session."""
    from rdverify.classnum import base_cases

    return base_cases()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
