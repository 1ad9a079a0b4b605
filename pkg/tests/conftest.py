import json
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def frozen():
    from oracles import FROZEN_PATH

    return json.loads(FROZEN_PATH.read_text())


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
