import json
from pathlib import Path

import pytest

ORACLE_FILE = Path(__file__).with_name("oracle_values.json")
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def oracle():
    return json.loads(ORACLE_FILE.read_text())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
