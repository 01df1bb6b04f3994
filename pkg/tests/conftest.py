import numpy as np
import pytest
from hypothesis import settings

from ehglue.reproduce import FAMILY_1
from ehglue.torus import family_configuration

settings.register_profile("ehglue", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("ehglue")

ACCEPTANCE_LINES = []


def record_acceptance(number, title, passed, detail):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def family1():
    return family_configuration(*FAMILY_1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_total_config(rng, L=None, orientation=None):
    """Total configuration with Gaussian gluing vectors."""
    from ehglue.torus import Configuration, chessboard_orientation
    L = np.eye(4) if L is None else L
    o = chessboard_orientation() if orientation is None else orientation
    return Configuration(L, o, rng.normal(size=(16, 3)))
