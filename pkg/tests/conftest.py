import numpy as np
import pytest

from mbe.grid import BC, Grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_grid(rng, bc=None, max_n=40):
    nx, ny = (int(v) for v in rng.integers(4, max_n, size=2))
    lx, ly = (float(v) for v in rng.uniform(0.5, 20.0, size=2))
    if bc is None:
        bc = BC.NEUMANN if rng.random() < 0.5 else BC.PERIODIC
    return Grid(nx, ny, lx, ly, bc)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            for line in RESULTS[n].splitlines():
                terminalreporter.write_line(line)
