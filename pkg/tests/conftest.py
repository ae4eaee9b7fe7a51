import json
import pathlib

import pytest

from spacekey.bits import encode_condition
from spacekey.complexity import Oracle, SpaceSchedule

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture
def oracle():
    return Oracle(verify_witnesses=True)


@pytest.fixture(scope="session")
def shared_oracle():
    return Oracle()


def schedule_for(n, **kw):
    return SpaceSchedule.for_length(n, **kw)


def load_golden(name):
    return json.loads((FIXTURES / name).read_text())


def fixture_condition(f):
    return encode_condition(f["condition_parts"]) if "condition_parts" in f else f["condition"]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
