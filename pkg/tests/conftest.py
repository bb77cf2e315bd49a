import numpy as np
import pytest

from cudl.curves import StepSurvivalCurve
from cudl.data import Dataset


class RowCurves:
    """Curve model that returns ``curves[int(x[0])]`` for each row; column 0 is a row id."""

    def __init__(self, curves):
        self.curves = list(curves)

    def predict_curves(self, X):
        return [self.curves[int(x[0])] for x in np.atleast_2d(X)]


def indexed(time, event):
    """Dataset whose single covariate is the row index (for :class:`RowCurves`)."""
    n = len(time)
    return Dataset(time, event, np.arange(n, dtype=float).reshape(n, 1))


def random_curve(rng, n_jumps=None, t_max=5.0, complete=False):
    n_jumps = n_jumps or int(rng.integers(1, 8))
    times = np.sort(rng.uniform(0.05, t_max, n_jumps))
    times = np.unique(times)
    values = np.sort(rng.uniform(0, 1, times.size))[::-1]
    if complete:
        values[-1] = 0.0
    return StepSurvivalCurve(times, values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Criterion number -> (passed, detail); echoed in the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, config):
    report = config.stash.get(_ACCEPTANCE, {})
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(report):
        passed, detail = report[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
