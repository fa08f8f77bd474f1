import numpy as np
import pytest

from bbrobust.classifier.stub import StubServer


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, h=16, w=16):
    return rng.integers(0, 256, (h, w, 3), dtype=np.uint8)


def constant_image(value, h=8, w=8):
    return np.full((h, w, 3), value, dtype=np.uint8)


@pytest.fixture
def stub():
    with StubServer() as server:
        yield server


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
