"""Physical constants and the conversion layer between lab units and the
internal hbar = 1 convention.

Internally every energy and rate is an angular frequency expressed in one
energy unit ``E0``; times carry the unit ``1/E0``. In quantum-dot units
``E0 = 1 meV`` so that the internal time unit is ``hbar/meV ~ 0.658 ps``.
"""

import math

HBAR_MEV_PS = 0.6582119569
"""Reduced Planck constant in meV ps."""

KB_MEV_PER_K = 0.08617333
"""Boltzmann constant in meV / K."""

UEV_PER_MEV = 1000.0


def ps_to_internal(t_ps, energy_unit_mev=1.0):
    """Convert a time in ps to internal units ``hbar / E0``."""
    return t_ps * energy_unit_mev / HBAR_MEV_PS


def internal_to_ps(t, energy_unit_mev=1.0):
    return t * HBAR_MEV_PS / energy_unit_mev


def ps2_to_internal(alpha_ps2, energy_unit_mev=1.0):
    """Convert a coupling strength in ps^2 (as in J = alpha w^3 ...) to
    internal units ``(hbar/E0)^2``."""
    return alpha_ps2 * (energy_unit_mev / HBAR_MEV_PS) ** 2


def internal_to_ps2(alpha, energy_unit_mev=1.0):
    return alpha * (HBAR_MEV_PS / energy_unit_mev) ** 2


def boltzmann(energy_unit_mev=1.0):
    """k_B expressed in internal energy units per kelvin."""
    return KB_MEV_PER_K / energy_unit_mev


def thermal_energy(temperature_k, energy_unit_mev=1.0):
    return temperature_k * boltzmann(energy_unit_mev)


def lifetime_ratio(theta, omega0, gamma):
    """Pulse area relative to the excited-state lifetime bound ``Omega0/gamma``.

    Dynamical spectral features require ``theta << omega0/gamma``; values
    approaching 1 mean the pulse outlasts the radiative lifetime.
    """
    if gamma <= 0:
        return 0.0
    return theta / (omega0 / gamma)


PI = math.pi
