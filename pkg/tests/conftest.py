import numpy as np
import pytest

from diffgof.model import make_family, make_simple_model

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: desk-scale Monte Carlo acceptance criteria")
    config.addinivalue_line("markers", "slow: Monte Carlo checks taking more than a few seconds")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ou_family():
    return make_family(1.0, 1.0, ((-2.0, 2.0), (0.5, 3.0)))


@pytest.fixture(scope="session")
def ou_simple():
    return make_simple_model(lambda x: -np.asarray(x), 1.0)
