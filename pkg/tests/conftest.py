import numpy as np
import pytest

from walktail import ExpShift, canonical_pareto

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def record(key, ok, detail):
    ACCEPTANCE_LINES[key] = f"{key}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[-1])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def pareto():
    return canonical_pareto()


@pytest.fixture(scope="session")
def expo():
    return ExpShift(rate=1.0, mu=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
