"""Drive envelopes, the rotating-frame Hamiltonian and dressed-state analytics."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import optimize, special

from .quantum import EXCITED, SIGMA_MINUS, SIGMA_PLUS

SHAPES = ("gaussian", "square", "cw")


class DegenerateDressedStates(ValueError):
    """Dressed states are undefined for a vanishing drive and detuning."""


class UnsupportedShape(ValueError):
    pass


@dataclass(frozen=True)
class PulseSpec:
    """Drive envelope.

    ``shape`` is one of ``"gaussian"``, ``"square"`` or ``"cw"``. ``area`` is
    the pulse area in radians (ignored for ``"cw"``). ``rise`` is the tanh
    edge time of square pulses; ``None`` selects 1% of the pulse duration.
    """

    shape: str = "gaussian"
    omega0: float = 1.0
    area: float = math.pi
    t_center: float = 0.0
    rise: float | None = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise UnsupportedShape(f"unknown pulse shape {self.shape!r}; expected one of {SHAPES}")
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if self.shape != "cw" and not self.area > 0:
            raise ValueError(f"pulse area must be positive, got {self.area}")
        if self.rise is not None and not self.rise > 0:
            raise ValueError(f"rise time must be positive, got {self.rise}")

    @property
    def width(self):
        """1/e half width ``tau = area / (sqrt(pi) omega0)`` of the Gaussian."""
        return self.area / (math.sqrt(math.pi) * self.omega0)

    @property
    def duration(self):
        """Flat-top duration of a square pulse with the requested area."""
        return self.area / self.omega0

    @property
    def rise_time(self):
        return self.rise if self.rise is not None else 0.01 * self.duration

    def extent(self):
        """Half-length of the interval around ``t_center`` that holds the pulse
        for the default simulation window."""
        if self.shape == "gaussian":
            return 5.0 * self.width
        if self.shape == "square":
            return 0.5 * self.duration + 10.0 * self.rise_time
        return 0.0


def rabi_envelope(pulse, t):
    """Instantaneous Rabi frequency ``Omega(t)``; vectorised over ``t``."""
    t = np.asarray(t, dtype=float)
    x = t - pulse.t_center
    if pulse.shape == "gaussian":
        out = pulse.omega0 * np.exp(-np.pi * (pulse.omega0 * x / pulse.area) ** 2)
    elif pulse.shape == "square":
        half = 0.5 * pulse.duration
        r = pulse.rise_time
        out = 0.5 * pulse.omega0 * (np.tanh((x + half) / r) - np.tanh((x - half) / r))
    else:
        out = np.full_like(x, pulse.omega0)
    return out if out.ndim else float(out)


def gaussian_fwhm(pulse):
    """Full width at half maximum of a Gaussian envelope."""
    if pulse.shape != "gaussian":
        raise UnsupportedShape("FWHM is only defined here for Gaussian pulses")
    return 2.0 * pulse.area / pulse.omega0 * math.sqrt(math.log(2.0) / math.pi)


def hamiltonian(pulse, delta, t):
    """Rotating-frame Hamiltonian ``delta s+s- + Omega(t)/2 (s+ + s-)``.

    Vectorised over ``t``; returns shape ``t.shape + (2, 2)``.
    """
    omega = np.asarray(rabi_envelope(pulse, t))
    return hamiltonian_from_rabi(omega, delta)


def hamiltonian_from_rabi(omega, delta):
    omega = np.asarray(omega, dtype=float)[..., None, None]
    return delta * EXCITED + 0.5 * omega * (SIGMA_PLUS + SIGMA_MINUS)


@dataclass(frozen=True)
class DressedState:
    omega_r: float
    energy_plus: float
    energy_minus: float
    kappa_plus: float
    kappa_minus: float

    def vector(self, sign):
        """Normalised ``|+>`` (sign=+1) or ``|->`` (sign=-1) in the ``(g, e)`` basis.

        Infinite ``kappa`` (the ``|+> -> |e>`` weak-drive limit) is handled as
        the normalised limit.
        """
        kappa = self.kappa_plus if sign > 0 else self.kappa_minus
        if math.isinf(kappa):
            return np.array([0.0, math.copysign(1.0, kappa)], dtype=complex)
        return np.array([1.0, kappa], dtype=complex) / math.sqrt(1.0 + kappa * kappa)


def dressed_states(omega, delta):
    """Dressed energies ``delta/2 +- omega_r/2`` and mixing coefficients
    ``kappa_pm = omega / (+-omega_r - delta)``."""
    if omega == 0 and delta == 0:
        raise DegenerateDressedStates("dressed states undefined for omega = delta = 0")
    omega_r = math.hypot(omega, delta)

    def kappa(sign):
        den = sign * omega_r - delta
        if den == 0.0:
            return math.copysign(math.inf, omega) if omega != 0 else math.inf
        return omega / den

    return DressedState(
        omega_r=omega_r,
        energy_plus=0.5 * delta + 0.5 * omega_r,
        energy_minus=0.5 * delta - 0.5 * omega_r,
        kappa_plus=kappa(1.0),
        kappa_minus=kappa(-1.0),
    )


def adiabaticity_lhs(pulse, delta, t):
    """Left side of the pulsed adiabatic-following criterion (adiabatic when << 1).

    ``t`` is absolute time; it is measured from the pulse center internally.
    """
    if pulse.shape != "gaussian":
        raise UnsupportedShape("adiabaticity criterion is defined for Gaussian pulses only")
    t = np.asarray(t, dtype=float)
    x = t - pulse.t_center
    omega = rabi_envelope(pulse, t)
    tau = pulse.width
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.abs(2.0 * delta * omega * x / (tau**2 * (omega**2 + delta**2) ** 1.5))
    val = np.where(delta == 0, 0.0, val)
    return val if val.ndim else float(val)


def adiabaticity_max(pulse, delta, resolution=1e-4):
    """Maximum of :func:`adiabaticity_lhs` over a dense scan of the pulse.

    ``resolution`` is the scan step in units of the pulse width.
    """
    if delta == 0:
        return 0.0, pulse.t_center
    tau = pulse.width
    t = pulse.t_center + np.arange(-6.0, 6.0 + resolution, resolution) * tau
    vals = adiabaticity_lhs(pulse, delta, t)
    k = int(np.argmax(vals))
    return float(vals[k]), float(t[k])


def _sidepeak_lhs(pulse, x):
    """``int_{-x}^{x} Omega - 2 Omega(x) x`` for a Gaussian centered at 0."""
    area = pulse.area * special.erf(math.sqrt(math.pi) * pulse.omega0 * x / pulse.area)
    return area - 2.0 * x * pulse.omega0 * np.exp(-np.pi * (pulse.omega0 * x / pulse.area) ** 2)


@dataclass(frozen=True)
class Sidepeak:
    n: int
    t: float
    omega: float


def sidepeak_times(pulse, n_max):
    """Times (from the pulse center) of constructive interference.

    Solves ``int_{-t}^{t} Omega - 2 Omega(t) t = (2n + 1/2) pi`` for
    ``n = 0..n_max``. Sidepeaks are expected at detunings ``+-Omega(t_n)``.
    The left side is bounded by the pulse area, so higher orders may have no
    solution and the returned list is shorter.
    """
    if pulse.shape != "gaussian":
        raise UnsupportedShape("sidepeak criterion is implemented for Gaussian pulses")
    tau = pulse.width
    step = tau / 1000.0
    grid = np.arange(0.0, 12.0 * tau + step, step)
    lhs = _sidepeak_lhs(pulse, grid)
    out = []
    for n in range(n_max + 1):
        target = (2 * n + 0.5) * math.pi
        above = np.nonzero(lhs >= target)[0]
        if above.size == 0:
            break
        k = above[0]
        if k == 0:
            continue
        root = optimize.bisect(
            lambda x: _sidepeak_lhs(pulse, x) - target, grid[k - 1], grid[k], xtol=1e-12, rtol=4 * np.finfo(float).eps
        )
        omega_n = float(rabi_envelope(pulse, pulse.t_center + root))
        out.append(Sidepeak(n=n, t=float(root), omega=omega_n))
    return out


def sidepeak_residual(pulse, sidepeak):
    return float(_sidepeak_lhs(pulse, sidepeak.t) - (2 * sidepeak.n + 0.5) * math.pi)
