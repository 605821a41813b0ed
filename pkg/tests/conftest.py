import json
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

# criterion number -> (passed, detail); filled in by test_acceptance
CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def golden():
    return json.loads((HERE / "golden" / "values.json").read_text())


@pytest.fixture(scope="session")
def family():
    from sues.oracle import searched_family

    return searched_family()


@pytest.fixture(scope="session")
def params(family):
    from sues.construction import SuesParams

    return SuesParams(2, family)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        ok, detail = CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
