import json
import os

import pytest

ORACLE_PATH = os.path.join(os.path.dirname(__file__), "oracles", "frozen.json")

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def oracles():
    with open(ORACLE_PATH) as fh:
        return json.load(fh)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
