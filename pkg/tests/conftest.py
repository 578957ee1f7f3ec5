import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from koszulnp.exactalg import PrimeField, RationalField  # noqa: E402
from koszulnp.polyspace import FatPointScheme  # noqa: E402

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def F():
    return PrimeField(2147483647)


@pytest.fixture
def Q():
    return RationalField()


@pytest.fixture
def scroll():
    return FatPointScheme([(0, 0, 1)], [1])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
