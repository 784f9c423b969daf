"""Shared fixtures and the acceptance-criteria terminal report."""

import numpy as np
import pytest

from stratdual import (
    UnitFrame,
    combine,
    compute_dual_moments,
    compute_moments,
    summarize_stratum,
)
from stratdual.datasets import demo_population


@pytest.fixture(scope="session")
def corrected_pop():
    return demo_population(corrected=True)


@pytest.fixture(scope="session")
def printed_pop():
    return demo_population(corrected=False)


@pytest.fixture(scope="session")
def corrected_m(corrected_pop):
    return compute_moments(corrected_pop)


@pytest.fixture(scope="session")
def corrected_md(corrected_pop):
    return compute_dual_moments(corrected_pop)


def _tiny_frames():
    return [
        UnitFrame(
            stratum_id="a",
            y=(10.0, 14.0, 12.0, 16.0, 13.0),
            x=(100.0, 130.0, 110.0, 150.0, 120.0),
            z=(50.0, 44.0, 48.0, 40.0, 46.0),
        ),
        UnitFrame(
            stratum_id="b",
            y=(20.0, 24.0, 22.0, 28.0, 25.0, 21.0),
            x=(200.0, 230.0, 215.0, 260.0, 240.0, 205.0),
            z=(60.0, 54.0, 57.0, 48.0, 52.0, 59.0),
        ),
    ]


@pytest.fixture
def tiny_frames():
    """Two small strata with hand-enterable values."""
    return _tiny_frames()


@pytest.fixture
def tiny_pop(tiny_frames):
    """The tiny frames summarized under design n = (2, 3)."""
    return combine([
        summarize_stratum(tiny_frames[0], 2),
        summarize_stratum(tiny_frames[1], 3),
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(20250815)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from _acceptance_log import NAMES, RESULTS

    if not RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(NAMES):
        status, detail = RESULTS.get(number, ("NO RESULT", "test did not run"))
        terminalreporter.write_line(
            f"ACCEPTANCE {number} ({NAMES[number]}): {status} — {detail}"
        )
