import numpy as np
import pytest

from ymflow.algebra import su2_exp
from ymflow.lattice import GaugeField, LatticeGeometry, LinkField
from ymflow.seeds import seed_random


def random_links(geometry, amplitude=1.0, seed=0):
    return seed_random(geometry, amplitude, seed)


def random_gauge(geometry, seed=0, amplitude=2.0):
    rng = np.random.default_rng(seed)
    return GaugeField(geometry, su2_exp(amplitude * rng.standard_normal(geometry.dims + (3,))))


def random_algebra(shape, seed=0):
    return np.random.default_rng(seed).standard_normal(tuple(shape) + (3,))


@pytest.fixture
def geo4():
    return LatticeGeometry((4, 4, 4, 4))


@pytest.fixture
def geo_mixed():
    return LatticeGeometry((4, 5, 4, 6), spacing=0.7)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
