import pytest

from sgstrip.core import ProblemParams
from sgstrip.linearizable import LinearizableSpectrum
from sgstrip.rh_solver import discretize_contour


@pytest.fixture(scope="session")
def spec_half():
    return LinearizableSpectrum(ProblemParams(0.5, 2.0))


@pytest.fixture(scope="session")
def disc_half(spec_half):
    return discretize_contour(spec_half, 1e-2, 1e2, 200)


@pytest.fixture(scope="session")
def spec_small():
    return LinearizableSpectrum(ProblemParams(0.01, 1.0))


@pytest.fixture(scope="session")
def disc_small(spec_small):
    return discretize_contour(spec_small, 1e-2, 1e2, 200)


@pytest.fixture(scope="session")
def run2_field(disc_small):
    """The d = 0.01, L = 1 reference run on the 10 x 9 grid."""
    from sgstrip.reconstruct import GridSpec, field_sweep
    return field_sweep(GridSpec(0.2, 2.0, 10, 0.1, 9), disc_small)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
