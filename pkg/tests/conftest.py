import itertools
import os

import numpy as np
import pytest

from oasampler.components import NIGHyper, family_for
from oasampler.species_sampling import FiniteDirichlet, GnedinMFM, PitmanYor
from oasampler.synthetic import load_data

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "oasampler", "data")

# Hyperparameters paired with the shipped n=5 triangle data set.
TRIANGLE_HYPER = NIGHyper(phi=0.0, lam=0.2, a=2.0, b=1.0)

FOUR_PRIORS = {
    "PY(0,1)": PitmanYor(0.0, 1.0),
    "PY(0.5,0.2)": PitmanYor(0.5, 0.2),
    "FD(1,3)": FiniteDirichlet(1.0, 3),
    "Gnedin(0.5)": GnedinMFM(0.5),
}


def compositions_up_to(n_max):
    """Every ordered tuple of positive block sizes with total <= n_max."""
    out = []
    for n in range(1, n_max + 1):
        for k in range(1, n + 1):
            for cut in itertools.combinations(range(1, n), k - 1):
                edges = (0,) + cut + (n,)
                out.append(tuple(b - a for a, b in zip(edges, edges[1:])))
    return out


@pytest.fixture
def triangle_data():
    return load_data(os.path.join(DATA_DIR, "triangle_n5.csv"))[:, 0]


@pytest.fixture
def triangle_family():
    return family_for(TRIANGLE_HYPER)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    import _report

    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_report.LINES):
            terminalreporter.write_line(_report.LINES[key])
