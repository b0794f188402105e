import numpy as np
import pytest

from gridosc.ingest import ChannelKind, PhasorChannel

ACCEPTANCE_LINES: list[str] = []


def make_channel(values, rate=30.0, id="CH", kind=ChannelKind.VPHM, t0=0.0, substation="SUB", location=None):
    return PhasorChannel(id, substation, kind, rate, t0, np.asarray(values, float), location)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
