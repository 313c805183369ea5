"""Closed-form continuous-wave results used as analytic oracles.

The steady-state coherence is written for the Hamiltonian
``delta s+s- + (omega/2)(s+ + s-)`` with ``delta = w_e - w_L`` and
``<s-> = tr(rho |g><e|)``; with these conventions

    <s-> = -(i omega / 2) (gamma_p - i delta) / (gamma_p^2 + delta^2 + omega^2 gamma_p / gamma)

so that ``Re <s->`` has the sign opposite to ``delta``.
"""

from dataclasses import dataclass
import math

from .drive import dressed_states


class SingularParameters(ValueError):
    pass


@dataclass(frozen=True)
class CwSteadyState:
    sigma_minus: complex
    population: float
    gamma_p: float


def cw_steady_state(omega, delta, gamma, gamma_prime):
    if not gamma > 0:
        raise SingularParameters("steady-state formulas need gamma > 0")
    if omega == 0:
        raise SingularParameters("steady-state formulas need a non-zero drive")
    gp = 0.5 * (gamma + gamma_prime)
    den = gp * gp + delta * delta + omega * omega * gp / gamma
    sm = -0.5j * omega * complex(gp, -delta) / den
    pop = 0.5 / (1.0 + (gamma / gp) * (gp * gp + delta * delta) / (omega * omega))
    return CwSteadyState(sigma_minus=sm, population=pop, gamma_p=gp)


@dataclass(frozen=True)
class TransitionWeights:
    """Dressed-transition spectral weights in units of the common rate."""

    gamma_plus_minus: float
    gamma_minus_plus: float

    @property
    def ratio(self):
        return self.gamma_plus_minus / self.gamma_minus_plus


def dressed_populations(kappa_plus, kappa_minus, ss):
    """``<+|rho|+>`` and ``<-|rho|->`` from the bare-basis expectations."""
    re = ss.sigma_minus.real
    p = ss.population

    def pop(k):
        return (1.0 + (k * k - 1.0) * p + 2.0 * k * re) / (1.0 + k * k)

    return pop(kappa_plus), pop(kappa_minus)


def transition_weights(omega, delta, ss):
    """Weights ``Gamma_{+-}`` and ``Gamma_{-+}``: dressed population times the
    squared dipole matrix element between dressed states."""
    d = dressed_states(omega, delta)
    kp, km = d.kappa_plus, d.kappa_minus
    if math.isinf(kp) or math.isinf(km) or kp == 0 or km == 0:
        raise SingularParameters("dressed mixing degenerate; no sideband transitions")
    norm = (1.0 + kp * kp) * (1.0 + km * km)
    # |<-|s-|+>|^2 and |<+|s-|->|^2
    elem_pm = kp * kp / norm
    elem_mp = km * km / norm
    pop_plus, pop_minus = dressed_populations(kp, km, ss)
    w_pm = pop_plus * elem_pm
    w_mp = pop_minus * elem_mp
    if w_mp == 0:
        raise SingularParameters("vanishing -> + weight")
    return TransitionWeights(gamma_plus_minus=w_pm, gamma_minus_plus=w_mp)


def asymmetry_ratio(omega, delta, ss):
    """Ratio of the ``+ -> -`` and ``- -> +`` weights in its factored form."""
    d = dressed_states(omega, delta)
    kp, km = d.kappa_plus, d.kappa_minus
    p = ss.population
    re = ss.sigma_minus.real
    num = 1.0 + (kp * kp - 1.0) * p + 2.0 * kp * re
    den = 1.0 + (km * km - 1.0) * p + 2.0 * km * re
    if den == 0:
        raise SingularParameters("vanishing denominator in asymmetry ratio")
    return kp * kp * (1.0 + km * km) / (km * km * (1.0 + kp * kp)) * num / den


@dataclass(frozen=True)
class MollowReference:
    """Strong-field (omega >> gamma) resonant Mollow triplet.

    Values are asymptotic; at finite ``omega/gamma`` they hold only
    approximately.
    """

    positions: tuple
    height_ratio_center_side: float = 3.0
    weight_ratio_center_side: float = 2.0
    weight_ratio_side_side: float = 1.0
    center_hwhm: float = 0.0
    side_hwhm: float = 0.0


def mollow_reference(omega, gamma):
    return MollowReference(positions=(-omega, 0.0, omega), center_hwhm=0.5 * gamma, side_hwhm=0.75 * gamma)
