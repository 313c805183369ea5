"""Resonance-fluorescence spectra of pulsed two-level systems.

Time-dependent Lindblad and polaron master equations, two-time correlations
via the quantum regression theorem, coherent/incoherent spectra, and
dressed-state analytics.
"""

import os

import numba

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is too old on some systems and only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

__version__ = "0.1.0"
