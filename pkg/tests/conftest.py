import pytest

from helpers import random_amalgams, transient_walks

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def walks():
    return transient_walks(11, 50)


@pytest.fixture(scope="session")
def amalgams():
    return random_amalgams(7, 50)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
