import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from projens import evolve as ev
from projens import hilbert as hb
from projens import models as md

# chain parameters used for the randomness studies (MHz, um)
RANDOMNESS_PARAMS = dict(omega=4.7, delta=0.9, c6=249e3, spacing=3.75)
# chain parameters used for benchmarking runs
BENCHMARK_PARAMS = dict(omega=5.3, delta=0.5, c6=249e3, spacing=3.75)


@pytest.fixture(scope="session")
def rydberg10_plateau():
    """Thermalized 10-site blockaded chain on the moment plateau.

    Returns (states, times); the window covers Omega t / 2pi from 1.8 to 3.2
    where the projected ensemble has equilibrated.
    """
    spec = md.RydbergSpec(n=10, **RANDOMNESS_PARAMS)
    basis = hb.build_basis(10, "blockade")
    h = md.build_rydberg(spec, basis)
    omega = RANDOMNESS_PARAMS["omega"]
    times = np.linspace(1.8 / omega, 3.2 / omega, 15)
    states = ev.evolve_exact(h, hb.StateVector.zero_state(basis), times).states
    return states, times
