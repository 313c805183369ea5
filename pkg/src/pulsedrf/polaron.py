"""Exciton / LA-phonon scattering in the polaron frame.

Kernel forms (imported from the standard polaron master-equation
construction, not derived here)::

    phi(tau) = int_0^inf dw J(w)/w^2 [coth(w / 2kT) cos(w tau) - i sin(w tau)]
    <B>      = exp(-phi(0) / 2)
    G_g(tau) = <B>^2 (cosh phi(tau) - 1)
    G_u(tau) = <B>^2 sinh phi(tau)
    X_g(t)   = (Omega(t)/2) (s+ + s-)
    X_u(t)   = i (Omega(t)/2) (s+ - s-)

The scattering term added to the master equation is

    -int_0^inf dtau sum_m G_m(tau) [X_m, U(tau) X_m U(tau)^+ rho] + h.c.

with ``U(tau) = exp(-i H_S(t) tau)`` for the instantaneous Hamiltonian.
Drive renormalisation by ``<B>`` and the polaron shift are not applied.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import units
from ._kernels import cos_sin_sums
from .drive import hamiltonian_from_rabi, rabi_envelope
from .quantum import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    dag,
    dressed_basis,
    expm_skew,
    sandwich,
    spost,
    spre,
)

OMEGA_MAX_FACTOR = 8.0
KERNEL_DECAY_TOL = 1e-5
QUAD_TOL = 1e-8
MEMORY_TOL = 1e-6
_GL_ORDER = 16

X_G_UNIT = SIGMA_PLUS + SIGMA_MINUS
X_U_UNIT = 1j * (SIGMA_PLUS - SIGMA_MINUS)


class KernelGridError(ValueError):
    """The tabulation grid cannot resolve the phonon kernels."""


@dataclass(frozen=True)
class PhononParams:
    """Super-ohmic bath ``J(w) = alpha w^3 exp(-w^2 / 2 w_b^2)``.

    ``alpha`` is in internal time units squared, ``omega_b`` in internal
    energy units and ``temperature`` in kelvin; ``kb`` converts kelvin to
    internal energy units (default: internal energy unit = 1 meV).
    """

    alpha: float
    omega_b: float
    temperature: float
    kb: float = units.KB_MEV_PER_K

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not self.omega_b > 0:
            raise ValueError("omega_b must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")

    @classmethod
    def from_lab(cls, alpha_ps2, omega_b_mev, temperature_k, energy_unit_mev=1.0):
        return cls(alpha=units.ps2_to_internal(alpha_ps2, energy_unit_mev),
                   omega_b=omega_b_mev / energy_unit_mev,
                   temperature=temperature_k,
                   kb=units.boltzmann(energy_unit_mev))

    @property
    def kt(self):
        return self.kb * self.temperature


def spectral_function(params, omega):
    omega = np.asarray(omega, dtype=float)
    out = params.alpha * omega**3 * np.exp(-(omega**2) / (2.0 * params.omega_b**2))
    return out if out.ndim else float(out)


def _thermal_weight(params, w):
    """``(J(w)/w^2) coth(w / 2kT)``; finite at ``w -> 0`` (limit ``2 alpha kT``)."""
    env = params.alpha * np.exp(-(w**2) / (2.0 * params.omega_b**2))
    if params.kt == 0:
        return env * w
    x = w / (2.0 * params.kt)
    small = x < 1e-8
    safe = np.where(small, 1.0, x)
    return env * np.where(small, 2.0 * params.kt, w / np.tanh(safe))


def _gl_nodes(params, panels):
    x, wts = np.polynomial.legendre.leggauss(_GL_ORDER)
    edges = np.linspace(0.0, OMEGA_MAX_FACTOR * params.omega_b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * wts[None, :]).ravel()
    return nodes, weights


def _phi_quadrature(params, tau, panels):
    nodes, weights = _gl_nodes(params, panels)
    even = _thermal_weight(params, nodes) * weights
    odd = params.alpha * nodes * np.exp(-(nodes**2) / (2.0 * params.omega_b**2)) * weights
    if tau.size > 2 and _is_uniform(tau):
        return cos_sin_sums(float(tau[0]), float(tau[1] - tau[0]), tau.size, nodes, even, odd)
    out = np.empty(tau.shape, dtype=complex)
    for k0 in range(0, tau.size, 256):
        arg = np.outer(tau[k0:k0 + 256], nodes)
        out[k0:k0 + 256] = np.cos(arg) @ even - 1j * (np.sin(arg) @ odd)
    return out


def _is_uniform(x):
    d = np.diff(x)
    return d[0] > 0 and bool(np.max(np.abs(d - d[0])) <= 1e-12 * max(abs(x[-1]), 1.0))


def _panels_for(params, tau_max):
    # one 16-node panel per oscillation period of the integrand
    cycles = tau_max * OMEGA_MAX_FACTOR * params.omega_b / (2.0 * math.pi)
    return max(32, int(math.ceil(cycles)))


def phonon_correlation(params, tau, check=True):
    """Polaron bath correlation ``phi(tau)`` (complex; vectorised over ``tau``).

    Composite Gauss-Legendre quadrature on ``(0, 8 omega_b]``. With
    ``check`` a subsample of the result is compared against a run with twice
    the nodes and a :class:`KernelGridError` is raised above ``1e-8``
    relative to ``|phi(0)|``.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if params.alpha == 0:
        out = np.zeros(tau.shape, dtype=complex)
        return out if out.size > 1 else complex(out[0])
    panels = _panels_for(params, float(np.max(np.abs(tau))))
    out = _phi_quadrature(params, tau, panels)
    if check:
        idx = np.unique(np.append(np.arange(0, tau.size, max(1, tau.size // 256)), tau.size - 1))
        ref = _phi_quadrature(params, tau[idx], 2 * panels)
        scale = max(abs(_phi_quadrature(params, np.zeros(1), panels)[0]), 1e-300)
        err = float(np.max(np.abs(out[idx] - ref))) / scale
        if err > QUAD_TOL:
            raise KernelGridError(f"phi quadrature not converged (node-doubling change {err:.2e})")
    return out if out.size > 1 else complex(out[0])


def memory_weights(n, step):
    """Trapezoid weights with third-order (Gregory) end corrections.

    The kernels have a finite slope at ``tau = 0``, which limits the plain
    trapezoid rule to ``O(step^2)``; the corrected ends remove that term.
    """
    w = np.full(n, float(step))
    if n < 6:
        w[[0, -1]] *= 0.5
        return w
    ends = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0]) * step
    w[:3] = ends
    w[-3:] = ends[::-1]
    return w


@dataclass
class PhononKernels:
    taus: np.ndarray
    phi: np.ndarray
    b_avg: float
    g_g: np.ndarray
    g_u: np.ndarray
    tau_cutoff: float
    n_cut: int

    @property
    def weights(self):
        """End-corrected trapezoid weights on ``[0, tau_cutoff]``."""
        if self.n_cut < 2:
            return np.zeros(max(self.n_cut, 1))
        return memory_weights(self.n_cut, self.taus[1] - self.taus[0])

    def transformed(self, omega):
        """``int_0^tau_cutoff G_m(tau) exp(-i omega tau)`` for m = g, u."""
        return _kernel_transform(self.taus[:self.n_cut], self.weights, self.g_g[:self.n_cut],
                                 self.g_u[:self.n_cut], omega)


def _kernel_transform(taus, weights, g_g, g_u, omega):
    omega = np.asarray(omega, dtype=float)
    flat = omega.ravel()
    wg = weights * g_g
    wu = weights * g_u
    out_g = np.empty(flat.shape, dtype=complex)
    out_u = np.empty(flat.shape, dtype=complex)
    for k0 in range(0, flat.size, 1024):
        ph = np.exp(-1j * np.outer(flat[k0:k0 + 1024], taus))
        out_g[k0:k0 + 1024] = ph @ wg
        out_u[k0:k0 + 1024] = ph @ wu
    return out_g.reshape(omega.shape), out_u.reshape(omega.shape)


def default_tau_grid(params, h=None, max_extent=4000.0, max_halvings=6):
    """Uniform memory grid long enough for ``phi`` to decay below ``1e-5`` of
    ``phi(0)``.

    The step starts at ``min(0.01/omega_b, h)`` and is halved until the
    memory integrals pass the node-halving check of :func:`build_kernels`.
    """
    step = 0.01 / params.omega_b
    if h is not None:
        step = min(step, h)
    if params.alpha == 0:
        return step * np.arange(2)
    extent = 20.0 / params.omega_b
    phi0 = abs(phonon_correlation(params, 0.0, check=False))
    while True:
        probe = np.linspace(0.0, extent, 2001)
        tail = np.abs(phonon_correlation(params, probe, check=False))
        ok = np.nonzero(tail > 0.5 * KERNEL_DECAY_TOL * phi0)[0]
        if ok[-1] < probe.size * 0.8:
            break
        extent *= 2
        if extent > max_extent / params.omega_b:
            raise KernelGridError("phonon correlation does not decay within the maximum memory time")
    for _ in range(max_halvings + 1):
        grid = step * np.arange(int(math.ceil(extent / step)) + 1)
        try:
            build_kernels(params, grid)
            return grid
        except KernelGridError as exc:
            if "too coarse" not in str(exc):
                raise
        step *= 0.5
    raise KernelGridError("memory integrals do not converge under step refinement")


def build_kernels(params, tau_grid):
    taus = np.asarray(tau_grid, dtype=float)
    if taus.size < 2 or taus[0] != 0.0:
        raise KernelGridError("memory grid must start at 0 and have at least two points")
    phi = phonon_correlation(params, taus)
    phi = np.atleast_1d(phi)
    b_avg = math.exp(-0.5 * phi[0].real)
    g_g = b_avg**2 * (np.cosh(phi) - 1.0)
    g_u = b_avg**2 * np.sinh(phi)
    if params.alpha == 0:
        return PhononKernels(taus, phi, 1.0, g_g, g_u, 0.0, 1)
    big = (np.abs(phi) > KERNEL_DECAY_TOL * abs(phi[0])) \
        | (np.abs(g_g) > KERNEL_DECAY_TOL * np.max(np.abs(g_g))) \
        | (np.abs(g_u) > KERNEL_DECAY_TOL * np.max(np.abs(g_u)))
    last = int(np.nonzero(big)[0][-1])
    if last >= taus.size - 1:
        raise KernelGridError(
            f"memory grid ends at {taus[-1]:.4g} before the kernels decay; "
            f"extend it beyond {taus[-1] * 2:.4g}")
    n_cut = last + 2
    kernels = PhononKernels(taus, phi, b_avg, g_g, g_u, float(taus[n_cut - 1]), n_cut)
    _check_memory_resolution(kernels, params)
    return kernels


def _check_memory_resolution(kernels, params):
    """Halving the node count must change the memory integrals by < 1e-6."""
    n = kernels.n_cut
    if n < 12:
        raise KernelGridError("memory grid too coarse for the kernel decay")
    probe = params.omega_b * np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    fine_g, fine_u = kernels.transformed(probe)
    m = n if n % 2 == 1 else n + 1
    if m > kernels.taus.size:
        m = n - 1
    taus = kernels.taus[:m:2]
    w = memory_weights(taus.size, taus[1] - taus[0])
    coarse_g, coarse_u = _kernel_transform(taus, w, kernels.g_g[:m:2], kernels.g_u[:m:2], probe)
    scale = max(np.max(np.abs(fine_g)), np.max(np.abs(fine_u)))
    err = max(np.max(np.abs(fine_g - coarse_g)), np.max(np.abs(fine_u - coarse_u))) / scale
    if err > MEMORY_TOL:
        raise KernelGridError(f"memory-integral step too coarse (node-halving change {err:.2e})")


def _scattering_operators(kernels, omega, delta):
    """Effective operators ``A_m = int G_m(tau) U X_m U^+`` for an array of drives.

    Returns ``(x_g, a_g, x_u, a_u)`` with shapes ``omega.shape + (2, 2)``.
    """
    omega = np.asarray(omega, dtype=float)
    evals, v = dressed_basis(omega, delta)
    omega_r = evals[..., 1] - evals[..., 0]
    # transforms at lambda_k - lambda_l: 0 (diagonal), -omega_r (0,1), +omega_r (1,0)
    g0_g, g0_u = kernels.transformed(np.zeros(1))
    gm_g, gm_u = kernels.transformed(-omega_r)
    gp_g, gp_u = kernels.transformed(omega_r)

    def build(g0, gm, gp):
        f = np.empty(omega.shape + (2, 2), dtype=complex)
        f[..., 0, 0] = g0[0]
        f[..., 1, 1] = g0[0]
        f[..., 0, 1] = gm
        f[..., 1, 0] = gp
        return f

    half = 0.5 * omega[..., None, None]
    vd = dag(v)
    out = []
    for unit, trans in ((X_G_UNIT, build(g0_g, gm_g, gp_g)), (X_U_UNIT, build(g0_u, gm_u, gp_u))):
        x = half * unit
        xe = vd @ x @ v
        a = v @ (xe * trans) @ vd
        out.extend((x, a))
    return tuple(out)


def _scattering_superop(x, a):
    ad = dag(a)
    return -(spre(x @ a) - sandwich(a, x) + spost(ad @ x) - sandwich(x, ad))


def polaron_superop(kernels, omega, delta):
    """Phonon scattering term as a Liouvillian, vectorised over ``omega``."""
    x_g, a_g, x_u, a_u = _scattering_operators(kernels, omega, delta)
    return _scattering_superop(x_g, a_g) + _scattering_superop(x_u, a_u)


def polaron_dissipator(config, kernels, rho, t):
    """Phonon scattering contribution to ``d rho/dt`` at time ``t``.

    Reference evaluation: explicit sum over the memory grid (same weights as
    :attr:`PhononKernels.weights`) with the frozen propagator at every node.
    """
    omega = float(rabi_envelope(config.pulse, t))
    h = hamiltonian_from_rabi(omega, config.delta)
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros((2, 2), dtype=complex)
    w = kernels.weights
    for unit, g in ((X_G_UNIT, kernels.g_g), (X_U_UNIT, kernels.g_u)):
        x = 0.5 * omega * unit
        a = np.zeros((2, 2), dtype=complex)
        for n in range(kernels.n_cut):
            u = expm_skew(h, kernels.taus[n])
            a += w[n] * g[n] * (u @ x @ dag(u))
        term = -(x @ a @ rho - a @ rho @ x)
        out += term + dag(term)
    return out
