import sys
from pathlib import Path

import pytest

from omegacv.variational import VariationalProblem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


@pytest.fixture(scope="session")
def exp_weight():
    return VariationalProblem.build("z^2", "2*exp(x/2)", 0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def line_problem():
    return VariationalProblem.build("z^2", "x", 0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def loaded_problem():
    return VariationalProblem.build("z^2/2 + y", "x", 0.0, 1.0, 0.0, 0.0)


@pytest.fixture(scope="session")
def problems_dir():
    return PROBLEMS


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
