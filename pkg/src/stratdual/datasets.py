"""Bundled demonstration dataset.

A six-stratum school-district population (923 districts; study variable
y = number of teachers, auxiliaries x = number of students and z =
number of classes) that exercises the whole pipeline, shipped in the
summary-level CSV schema.

Two variants are included.  The *printed* variant reproduces the
original published table verbatim, including its impossible ``s_xz``
value in stratum 3 (the implied correlation exceeds 1, which
:func:`stratdual.domain.validate` flags and can repair).  The
*corrected* variant ships that covariance with the one-decimal-shift
repair applied and is the default input for golden-number tests.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .domain import PopulationSummary, StratumSummary, combine, read_summary_csv

__all__ = ["demo_path", "demo_strata", "demo_population"]

_FILES = {
    True: "table1_corrected.csv",
    False: "table1_printed.csv",
}


def demo_path(corrected: bool = True) -> Path:
    """Filesystem path of the bundled demo fixture CSV."""
    return Path(resources.files("stratdual.data") / _FILES[corrected])


def demo_strata(corrected: bool = True) -> list[StratumSummary]:
    """The demo fixture as a list of stratum summaries."""
    return read_summary_csv(demo_path(corrected))


def demo_population(corrected: bool = True) -> PopulationSummary:
    """The demo fixture combined into a :class:`PopulationSummary`."""
    return combine(demo_strata(corrected))
