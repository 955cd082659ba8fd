import numpy as np
import pytest

from gapfit.model import HospitalSeries

# one line per acceptance criterion, echoed after the run (see
# pytest_terminal_summary below); populated by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_series(y, z=None, id="s"):
    """Series builder; None entries in y mean 'not reported'."""
    y = [np.nan if v is None else float(v) for v in y]
    if z is None:
        z = np.ones(len(y))
    return HospitalSeries(id, np.asarray(y, dtype=float), np.asarray(z, dtype=float))


@pytest.fixture
def anchor_series():
    # y=(2,3,3,4), z=1 everywhere, fully reported.  At beta=0 the loss is 2/3
    # with gradient (-4/3, -10/3, -4/3); used as the analytic anchor throughout.
    return make_series([2, 3, 3, 4])


def random_gapped_series(rng, T=None, id="r"):
    if T is None:
        T = int(rng.integers(6, 16))
    y = np.abs(rng.normal(8.0, 4.0, T)) + 0.5
    miss = rng.random(T) < 0.3
    miss[0] = False
    y[miss] = np.nan
    if np.isfinite(y).sum() < 2:
        y[-1] = 1.0
    z = rng.uniform(0.0, 3.0, T)
    return HospitalSeries(id, y, z)
