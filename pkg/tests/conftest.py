import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ifcexp import make_z_channel  # noqa: E402


@pytest.fixture(scope="session")
def zch():
    return make_z_channel(0.01)


@pytest.fixture(scope="session")
def uniform2():
    return np.array([0.5, 0.5])


CRITERIA = {}


def record_criterion(k, ok, message):
    """Keep one summary line per acceptance criterion and echo it."""
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {message}"
    CRITERIA[k] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
