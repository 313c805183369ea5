"""Time-dependent master-equation propagation and two-time correlations.

The generator is assembled as a 4x4 Liouvillian (see :mod:`pulsedrf.quantum`
for the vectorisation convention). Propagation is classical RK4 on a fixed
fine step ``h``; since the equation is linear, each step is itself a 4x4 map
that is tabulated once and shared by the single-time trajectory and every
regression row.

Once the envelope has died away (or for a constant drive from the start) the
generator is constant. From that point the same RK4 map is applied in
lattice-sized strides, and for spectra all regression rows are pooled into a
single state, because a constant linear map commutes with the sum over rows.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from . import _kernels
from .drive import PulseSpec, rabi_envelope, hamiltonian_from_rabi
from .quantum import (
    EXCITED,
    GROUND,
    SIGMA_MINUS,
    SIGMA_PLUS,
    density_defects,
    hamiltonian_superop,
    lindblad_superop,
    purity,
    unvec,
    vec,
)

TRACE_TOL = 1e-8
HERMITICITY_TOL = 1e-10
POSITIVITY_TOL = 1e-8
POLARON_POSITIVITY_TOL = 1e-6
TAIL_TOL = 1e-13
"""Relative envelope change below which the generator counts as constant."""
TAU_DECAY_TOL = 1e-6


class ConfigError(ValueError):
    """Inconsistent or invalid simulation configuration."""


class PropagationDiverged(RuntimeError):
    """A density-matrix invariant failed during propagation."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grids for the outer time ``t`` and the delay ``tau``.

    All stored quantities live on a lattice of spacing ``dtau`` starting at
    ``t_init`` (the propagation start, defaulting to ``t_start``). The
    ``t`` spacing must be an integer multiple of ``dtau`` and ``t_start``
    must sit on the lattice. The RK4 step is ``dtau / substeps``.
    """

    t_start: float
    t_end: float
    n_t: int
    tau_max: float
    n_tau: int
    substeps: int = 5
    t_init: float | None = None

    def __post_init__(self):
        if self.n_t < 2 or self.n_tau < 2:
            raise ConfigError("n_t and n_tau must both be >= 2")
        if not self.t_end > self.t_start:
            raise ConfigError("t_end must exceed t_start")
        if not self.tau_max > 0:
            raise ConfigError("tau_max must be positive")
        if self.substeps < 1:
            raise ConfigError("substeps must be >= 1")
        if self.t_init is not None and self.t_init > self.t_start:
            raise ConfigError("t_init must not exceed t_start")
        self.stride
        self.offset

    @property
    def dt(self):
        return (self.t_end - self.t_start) / (self.n_t - 1)

    @property
    def dtau(self):
        return self.tau_max / (self.n_tau - 1)

    @property
    def h(self):
        return self.dtau / self.substeps

    @property
    def start(self):
        return self.t_start if self.t_init is None else self.t_init

    @staticmethod
    def _as_int(x, what):
        k = round(x)
        if abs(x - k) > 1e-9 * max(1.0, abs(x)):
            raise ConfigError(f"{what} must be an integer multiple of the tau spacing (ratio {x})")
        return int(k)

    @property
    def stride(self):
        """Lattice points per ``t`` step."""
        return self._as_int(self.dt / self.dtau, "t spacing")

    @property
    def offset(self):
        """Lattice index of ``t_start``."""
        return self._as_int((self.t_start - self.start) / self.dtau, "t_start - t_init")

    @property
    def times(self):
        return self.t_start + self.dt * np.arange(self.n_t)

    @property
    def taus(self):
        return self.dtau * np.arange(self.n_tau)

    @property
    def n_lattice(self):
        return self.offset + (self.n_t - 1) * self.stride + self.n_tau

    @property
    def lattice(self):
        return self.start + self.dtau * np.arange(self.n_lattice)

    @property
    def row_starts(self):
        return self.offset + self.stride * np.arange(self.n_t)

    def refined(self, factor=2):
        """Same lattice with ``factor`` times more RK4 substeps."""
        return TimeGrid(self.t_start, self.t_end, self.n_t, self.tau_max, self.n_tau,
                        self.substeps * factor, self.t_init)


@dataclass(frozen=True)
class SimConfig:
    delta: float
    gamma: float
    gamma_prime: float
    pulse: PulseSpec
    grid: TimeGrid
    phonon: object = None  # polaron.PhononParams

    def __post_init__(self):
        if self.gamma < 0 or self.gamma_prime < 0:
            raise ConfigError("decay rates must be non-negative")
        h = self.grid.h
        slack = 1.0 + 1e-9
        if h > slack / (50.0 * self.pulse.omega0):
            raise ConfigError(
                f"integration step {h:.4g} exceeds 1/(50 omega0) = {1 / (50 * self.pulse.omega0):.4g}; "
                "increase substeps or n_tau")
        if self.delta != 0 and h > slack / (50.0 * abs(self.delta)):
            raise ConfigError(
                f"integration step {h:.4g} exceeds 1/(50 |delta|) = {1 / (50 * abs(self.delta)):.4g}")

    @property
    def gamma_p(self):
        return 0.5 * (self.gamma + self.gamma_prime)

    def replace(self, **changes):
        from dataclasses import replace
        return replace(self, **changes)


# --- generators --------------------------------------------------------------

def dissipator(gamma, gamma_prime):
    """Constant part: spontaneous emission and pure dephasing."""
    return lindblad_superop(SIGMA_MINUS, gamma) + lindblad_superop(EXCITED, gamma_prime)


def liouvillian_from_rabi(config, omega, kernels=None):
    """Generators for an array of Rabi frequencies, shape ``omega.shape + (4, 4)``."""
    omega = np.asarray(omega, dtype=float)
    out = hamiltonian_superop(hamiltonian_from_rabi(omega, config.delta))
    out = out + dissipator(config.gamma, config.gamma_prime)
    if kernels is not None:
        from .polaron import polaron_superop
        out = out + polaron_superop(kernels, omega, config.delta)
    return out


def liouvillian(config, t, kernels=None):
    """Generator of the master equation at time(s) ``t``.

    Includes the phonon scattering term when ``config.phonon`` is set; the
    kernels are built on demand if not supplied.
    """
    if config.phonon is not None and kernels is None:
        kernels = phonon_kernels(config)
    return liouvillian_from_rabi(config, rabi_envelope(config.pulse, t), kernels)


def phonon_kernels(config):
    from .polaron import build_kernels, default_tau_grid
    if config.phonon is None:
        return None
    return build_kernels(config.phonon, default_tau_grid(config.phonon, config.grid.h))


def rk4_maps(l0, lm, l1, h):
    """One RK4 step of ``v' = L(t) v`` as a matrix, batched over leading axes."""
    eye = np.eye(4, dtype=complex)
    a1 = l0
    a2 = lm @ (eye + 0.5 * h * a1)
    a3 = lm @ (eye + 0.5 * h * a2)
    a4 = l1 @ (eye + h * a3)
    return eye + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)


@dataclass
class Propagator:
    """Tabulated RK4 step maps for one configuration.

    ``steps[k]`` advances fine step ``k``; from lattice index ``a_tail`` on,
    ``tail`` advances one whole lattice step.
    """

    grid: TimeGrid
    steps: np.ndarray
    tail: np.ndarray
    tail_generator: np.ndarray
    a_tail: int
    kernels: object = None

    @property
    def t_tail(self):
        return self.grid.start + self.a_tail * self.grid.dtau


_CHUNK = 4096


def build_propagator(config, kernels=None):
    grid = config.grid
    if config.phonon is not None and kernels is None:
        kernels = phonon_kernels(config)
    h = grid.h
    n_fine = (grid.n_lattice - 1) * grid.substeps
    half = grid.start + 0.5 * h * np.arange(2 * n_fine + 1)
    omega = np.asarray(rabi_envelope(config.pulse, half), dtype=float)
    bad = np.nonzero(np.abs(omega - omega[-1]) > TAIL_TOL * config.pulse.omega0)[0]
    k_tail = 0 if bad.size == 0 else int(bad[-1] // 2 + 1)
    a_tail = min(-(-k_tail // grid.substeps), grid.n_lattice - 1)
    n_steps = a_tail * grid.substeps

    steps = np.empty((n_steps, 4, 4), dtype=complex)
    for k0 in range(0, n_steps, _CHUNK):
        k1 = min(k0 + _CHUNK, n_steps)
        gen = liouvillian_from_rabi(config, omega[2 * k0: 2 * k1 + 1], kernels)
        steps[k0:k1] = rk4_maps(gen[0:-1:2], gen[1::2], gen[2::2], h)

    tail_gen = liouvillian_from_rabi(config, omega[-1], kernels)
    one = rk4_maps(tail_gen, tail_gen, tail_gen, h)
    tail = np.linalg.matrix_power(one, grid.substeps)
    return Propagator(grid=grid, steps=np.ascontiguousarray(steps), tail=tail,
                      tail_generator=tail_gen, a_tail=a_tail, kernels=kernels)


# --- single-time evolution ---------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    rho: np.ndarray
    sigma_minus_exp: np.ndarray = field(init=False)
    population: np.ndarray = field(init=False)

    def __post_init__(self):
        self.sigma_minus_exp = self.rho[:, 1, 0].copy()
        self.population = self.rho[:, 1, 1].real.copy()


def check_states(times, rho, positivity_tol=POSITIVITY_TOL):
    """Raise :class:`PropagationDiverged` at the first invalid density matrix."""
    herm, trace_err, min_eig = density_defects(rho)
    bad = (herm > HERMITICITY_TOL) | (trace_err > TRACE_TOL) | (min_eig < -positivity_tol)
    bad |= ~np.isfinite(trace_err)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise PropagationDiverged(
            f"density matrix invalid at t = {times[k]:.6g}: hermiticity {herm[k]:.3g}, "
            f"trace error {trace_err[k]:.3g}, min eigenvalue {min_eig[k]:.3g}", times[k])


def evolve(config, rho0=None, propagator=None):
    """Propagate ``rho0`` (default: ground state) across the whole lattice.

    The trajectory covers ``[t_init, t_end + tau_max]`` so that coherent
    correlations never need extrapolation.
    """
    prop = propagator or build_propagator(config)
    grid = config.grid
    rho0 = GROUND if rho0 is None else np.asarray(rho0, dtype=complex)
    check_states(np.array([grid.start]), rho0[None])
    v = _kernels.evolve_lattice(prop.steps, prop.tail, grid.substeps, prop.a_tail,
                                vec(rho0).astype(complex), grid.n_lattice)
    rho = unvec(v)
    tol = POLARON_POSITIVITY_TOL if config.phonon is not None else POSITIVITY_TOL
    check_states(grid.lattice, rho, tol)
    if np.max(purity(rho)) > 1 + 1e-8:
        raise PropagationDiverged("purity exceeds 1", float(grid.lattice[np.argmax(purity(rho))]))
    return Trajectory(times=grid.lattice, rho=rho)


# --- two-time correlations ---------------------------------------------------

@dataclass
class CorrelationGrid:
    """``g[i, j] = <s+(t_i) s-(t_i + tau_j)>``."""

    times: np.ndarray
    taus: np.ndarray
    g: np.ndarray


def _row_initial(traj, starts):
    """Regression seeds ``B = rho(t_i) s+`` as Liouville vectors."""
    return np.ascontiguousarray(vec(traj.rho[starts] @ SIGMA_PLUS))


def _check_traj(grid, traj):
    if traj.times.shape[0] != grid.n_lattice or not np.allclose(
            traj.times[[0, -1]], grid.lattice[[0, -1]], rtol=0, atol=1e-8 * grid.dtau):
        raise ConfigError("trajectory does not match the configuration's time lattice")


def regression_grid(config, traj, propagator=None, max_elements=50_000_000):
    """Full two-time correlation grid via the quantum regression theorem.

    Each row seeds ``rho(t_i) s+`` and propagates it with the same
    absolute-time generator, so the drive keeps evolving during the delay.
    Memory scales as ``n_t * n_tau``; use :func:`integrated_correlation`
    for spectra of large problems.
    """
    grid = config.grid
    _check_traj(config.grid, traj)
    if grid.n_t * grid.n_tau > max_elements:
        raise ConfigError(f"grid of {grid.n_t}x{grid.n_tau} exceeds {max_elements} elements")
    prop = propagator or build_propagator(config)
    starts = grid.row_starts.astype(np.int64)
    g = _kernels.regression_rows_full(prop.steps, prop.tail, grid.substeps, prop.a_tail,
                                      starts, _row_initial(traj, starts), grid.n_tau)
    mismatch = np.max(np.abs(g[:, 0] - traj.population[starts]))
    if mismatch > 1e-10:
        raise PropagationDiverged(f"regression identity violated at tau = 0 by {mismatch:.3g}", grid.t_start)
    if np.max(np.abs(g)) > 1 + 1e-8:
        raise PropagationDiverged("correlation modulus exceeds 1", grid.t_start)
    return CorrelationGrid(times=grid.times, taus=grid.taus, g=g)


def time_weights(grid):
    """Trapezoidal weights of the outer ``t`` integral (including ``dt``)."""
    w = np.full(grid.n_t, grid.dt)
    w[[0, -1]] *= 0.5
    return w


@dataclass
class IntegratedCorrelation:
    """Correlations already integrated over ``t``.

    ``total[j] = int dt <s+(t) s-(t+tau_j)>`` and
    ``coherent[j] = int dt <s+(t)><s-(t+tau_j)>``, both trapezoidal.
    """

    taus: np.ndarray
    total: np.ndarray
    coherent: np.ndarray

    @property
    def incoherent(self):
        return self.total - self.coherent


def integrated_total(config, traj, propagator=None):
    grid = config.grid
    prop = propagator or build_propagator(config)
    starts = grid.row_starts.astype(np.int64)
    w = time_weights(grid)
    init = _row_initial(traj, starts)

    pre = starts < prop.a_tail
    total = np.zeros(grid.n_tau, dtype=complex)
    inject = np.zeros((grid.n_tau, 4), dtype=complex)
    if np.any(pre):
        g, entry = _kernels.regression_rows_pretail(prop.steps, grid.substeps, prop.a_tail,
                                                    starts[pre], init[pre], grid.n_tau)
        total[:g.shape[1]] += w[pre] @ g
        j_entry = np.minimum(prop.a_tail - starts[pre], grid.n_tau - 1)
        np.add.at(inject, j_entry, w[pre, None] * entry)
    inject[0] += w[~pre] @ init[~pre]
    total += _kernels.tail_accumulate(prop.tail, inject, grid.n_tau)
    return total


def integrated_coherent(grid, traj):
    _check_traj(grid, traj)
    starts = grid.row_starts.astype(np.int64)
    s = np.ascontiguousarray(traj.sigma_minus_exp)
    return _kernels.weighted_cross_correlation(np.conj(s[starts]), starts, time_weights(grid), s, grid.n_tau)


def integrated_correlation(config, traj, propagator=None):
    """Total and coherent correlations integrated over ``t`` without storing the
    full two-time grid."""
    _check_traj(config.grid, traj)
    total = integrated_total(config, traj, propagator)
    coherent = integrated_coherent(config.grid, traj)
    # measured against the total, the scale on which tau_max was chosen
    peak = np.max(np.abs(total))
    residual = abs(total[-1] - coherent[-1])
    if peak > 0 and residual > TAU_DECAY_TOL * peak:
        warnings.warn(
            f"incoherent correlation at tau_max is {residual / peak:.2e} of the total maximum; "
            "increase tau_max", RuntimeWarning, stacklevel=2)
    return IntegratedCorrelation(taus=config.grid.taus, total=total, coherent=coherent)


# --- default discretisation --------------------------------------------------

def slowest_rate(generator):
    """Smallest non-zero decay rate of a constant generator."""
    ev = np.linalg.eigvals(generator)
    scale = max(1.0, float(np.max(np.abs(ev))))
    rates = -ev.real[np.abs(ev) > 1e-10 * scale]
    if rates.size == 0 or np.min(rates) <= 0:
        raise ConfigError("generator has undamped modes; a finite tau window cannot be chosen")
    return float(np.min(rates))


def default_time_grid(pulse, delta, gamma, gamma_prime, phonon=None, substeps=5,
                      points_per_unit=10.0, stride=1, cw_window=None):
    """Default grids: lattice ``dtau = 0.1 / max(omega0, |delta|, gamma, gamma')``.

    Pulses: ``t`` in ``[tc - T, tc + T + 10/gamma]`` with ``T`` the pulse
    half-extent; ``tau_max`` covers the pulse plus decay of the slowest
    post-pulse mode to 1e-6. Constant drive: propagate from the ground state
    through a burn-in until transients fall below 1e-10, then integrate over a
    window of ``10/gamma``.
    """
    scale = max(pulse.omega0, abs(delta), gamma, gamma_prime)
    dtau = 1.0 / (points_per_unit * scale)
    probe = SimConfig(delta, gamma, gamma_prime, pulse,
                      TimeGrid(0.0, dtau, 2, dtau, 2, substeps))
    omega_tail = pulse.omega0 if pulse.shape == "cw" else 0.0
    kernels = None
    if phonon is not None and pulse.shape == "cw":
        from .polaron import build_kernels, default_tau_grid
        kernels = build_kernels(phonon, default_tau_grid(phonon, dtau / substeps))
    rate = slowest_rate(liouvillian_from_rabi(probe, omega_tail, kernels))
    decay = math.log(1.0 / TAU_DECAY_TOL) / rate
    if gamma <= 0:
        raise ConfigError("default windows need gamma > 0")

    def lattice_count(length):
        return int(math.ceil(length / dtau - 1e-9))

    if pulse.shape == "cw":
        burn = lattice_count(math.log(1e10) / rate) * dtau
        window = cw_window if cw_window is not None else 10.0 / gamma
        n_w = max(lattice_count(window / stride), 1)
        t_init = pulse.t_center
        t_start = t_init + burn
        n_t = n_w + 1
        t_end = t_start + n_w * stride * dtau
        n_tau = lattice_count(decay) + 1
    else:
        ext = pulse.extent()
        t_init = pulse.t_center - ext
        t_start = t_init
        n_w = lattice_count((2 * ext + 10.0 / gamma) / stride)
        n_t = n_w + 1
        t_end = t_start + n_w * stride * dtau
        n_tau = lattice_count(2 * ext + decay) + 1
    return TimeGrid(t_start=t_start, t_end=t_end, n_t=n_t, tau_max=(n_tau - 1) * dtau,
                    n_tau=n_tau, substeps=substeps, t_init=t_init)


def make_config(pulse, delta=0.0, gamma=0.025, gamma_prime=0.0, phonon=None, grid=None, **grid_kw):
    if grid is None:
        grid = default_time_grid(pulse, delta, gamma, gamma_prime, phonon, **grid_kw)
    return SimConfig(delta=delta, gamma=gamma, gamma_prime=gamma_prime, pulse=pulse,
                     grid=grid, phonon=phonon)
