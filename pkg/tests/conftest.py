import pytest

from reram_fsa.controller import Controller
from reram_fsa.crossbar import Crossbar, CrossbarConfig
from reram_fsa.device import CellDevice, StateId, VariationProfile, program

NO_VARIATION = VariationProfile.disabled()


@pytest.fixture
def cell():
    return CellDevice.fresh(seed=123)


@pytest.fixture
def xbar():
    return Crossbar(CrossbarConfig(4, 4))


@pytest.fixture
def ctl(xbar):
    return Controller(xbar)


def put(cell, state):
    """Program a cell straight into ``state`` (test helper, bypasses the controller)."""
    return program(cell, StateId.parse(state))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
