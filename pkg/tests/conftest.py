import functools
import math

import numpy as np
import pytest

from pulsedrf.drive import PulseSpec
from pulsedrf.lindblad import make_config
from pulsedrf.polaron import PhononParams
from pulsedrf.spectrum import default_detunings, simulate

GAMMA_FIG1 = 1.0 / 40.0
GAMMA_QD = 0.010  # meV
FIG3_PHONONS = PhononParams.from_lab(0.06, 1.0, 4.0)


@functools.lru_cache(maxsize=None)
def pulsed_run(theta_over_pi, delta=0.0, gamma=GAMMA_FIG1, gamma_prime=0.0, phonons=False):
    pulse = PulseSpec("gaussian", 1.0, theta_over_pi * math.pi)
    cfg = make_config(pulse, delta, gamma, gamma_prime, phonon=FIG3_PHONONS if phonons else None)
    return cfg, simulate(cfg, default_detunings(1.0))


@functools.lru_cache(maxsize=None)
def cw_run(omega=1.0, delta=0.0, gamma=GAMMA_FIG1, gamma_prime=0.0):
    cfg = make_config(PulseSpec("cw", omega, 1.0), delta, gamma, gamma_prime)
    return cfg, simulate(cfg, default_detunings(omega))


@functools.lru_cache(maxsize=None)
def fig3_run(delta, phonons):
    return pulsed_run(5.0, delta, GAMMA_QD, 0.0, phonons)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
