import numpy as np
import pytest
from hypothesis import settings

from lpnse.spectral import Grid, PhysicalField, SpectralField, SpectralVectorField, forward, leray_project

settings.register_profile("lpnse", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("lpnse")


def random_scalar(grid, rng, mean_zero=True):
    c = forward(rng.standard_normal(grid.shape))
    if mean_zero:
        c[0, 0, 0] = 0.0
    return SpectralField(grid, c)


def random_vector(grid, rng, mean_zero=True, solenoidal=False, band_limited=False):
    c = forward(rng.standard_normal((3,) + grid.shape))
    if band_limited:
        c *= grid.dealias_mask("two-thirds")
    if mean_zero:
        c[:, 0, 0, 0] = 0.0
    u = SpectralVectorField(grid, c)
    return leray_project(u) if solenoidal else u


def cos_mode(grid, m=1, axis=0):
    x = grid.mesh()[axis]
    return PhysicalField(grid, np.cos(m * x))


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


@pytest.fixture(params=[8, 16, 32], ids=lambda n: f"n{n}")
def grid(request):
    return Grid(request.param)


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
