import warnings

import numpy as np
import pytest

from wellsqueeze import TargetSpec, WellSpec, coupling_matrix, synthesize, target_coefficients

FIG1_SIGMA = 0.02
FIG1_N = 30
FIG1_T = 100.0

_CRITERIA = []


@pytest.fixture(scope="session")
def fig1():
    well = WellSpec(num_levels=FIG1_N)
    cm = coupling_matrix(well)
    tspec = TargetSpec(FIG1_SIGMA, 0.5)
    target = target_coefficients(tspec, well)
    sched = synthesize(target, cm, FIG1_T)
    return dict(well=well, cm=cm, tspec=tspec, target=target, sched=sched)


@pytest.fixture
def criterion():
    """Record a named acceptance check; summarised at the end of the run."""

    def record(name, passed, detail):
        _CRITERIA.append((name, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def quiet_target(sigma, x0, length=1.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return TargetSpec(sigma, x0, length)
