"""Total, coherent and incoherent spectra from integrated correlations, plus
peak and sideband analysis."""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .lindblad import (
    ConfigError,
    CorrelationGrid,
    IntegratedCorrelation,
    build_propagator,
    evolve,
    integrated_coherent,
    integrated_correlation,
    time_weights,
)

DUAL_PATH_TOL = 1e-9


class NumericalError(RuntimeError):
    pass


def default_detunings(omega0, n=2001, extent=2.5):
    return np.linspace(-extent * omega0, extent * omega0, n)


def tau_weights(n_tau, dtau):
    w = np.full(n_tau, dtau)
    w[[0, -1]] *= 0.5
    return w


def _is_uniform(x):
    if x.size < 3:
        return True
    d = np.diff(x)
    return bool(np.max(np.abs(d - d[0])) <= 1e-9 * abs(d[0]))


def one_sided_transform(f, taus, detunings, method="fast"):
    """``Re sum_j w_j f_j exp(i delta tau_j)`` with trapezoidal ``w_j``.

    ``method="direct"`` sums explicitly; ``"fast"`` uses a chirp-z transform
    and needs a uniform detuning axis.
    """
    f = np.asarray(f, dtype=complex)
    taus = np.asarray(taus, dtype=float)
    d = np.asarray(detunings, dtype=float)
    dtau = taus[1] - taus[0]
    x = f * tau_weights(f.size, dtau)
    if method == "direct":
        out = np.empty(d.size)
        for k0 in range(0, d.size, 64):
            blk = d[k0:k0 + 64]
            out[k0:k0 + 64] = (np.exp(1j * np.outer(blk, taus)) @ x).real
        return out
    if method != "fast":
        raise ValueError(f"unknown transform method {method!r}")
    if not _is_uniform(d):
        raise ConfigError("fast transform needs a uniform detuning axis")
    step = d[1] - d[0] if d.size > 1 else 0.0
    a = np.exp(-1j * d[0] * dtau)
    w = np.exp(1j * step * dtau)
    y = signal.czt(x, m=d.size, w=w, a=a)
    return (y * np.exp(1j * d * taus[0])).real


def _relative_gap(a, b):
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return 0.0 if scale == 0 else float(np.max(np.abs(a - b)) / scale)


def dual_transform(f, taus, detunings):
    """Fast transform checked against the direct sum (relative gap returned)."""
    fast = one_sided_transform(f, taus, detunings, "fast")
    direct = one_sided_transform(f, taus, detunings, "direct")
    return fast, _relative_gap(fast, direct)


def total_spectrum(correlation, time_grid, detunings, method="fast"):
    """Total spectrum from a :class:`CorrelationGrid` (integrated over ``t``
    here) or an :class:`IntegratedCorrelation`."""
    if isinstance(correlation, CorrelationGrid):
        if correlation.g.shape != (time_grid.n_t, time_grid.n_tau):
            raise ConfigError("correlation grid does not match the time grid")
        f = time_weights(time_grid) @ correlation.g
    elif isinstance(correlation, IntegratedCorrelation):
        f = correlation.total
    else:
        f = np.asarray(correlation)
    return one_sided_transform(f, time_grid.taus, detunings, method)


def coherent_spectrum(traj, time_grid, detunings, method="fast"):
    """Spectrum of the factorised correlation ``<s+(t)><s-(t+tau)>``."""
    if traj.times[-1] < time_grid.t_end + time_grid.tau_max - 1e-9 * max(1.0, abs(traj.times[-1])):
        raise ConfigError("trajectory does not extend to t_end + tau_max")
    c = integrated_coherent(time_grid, traj)
    return one_sided_transform(c, time_grid.taus, detunings, method)


@dataclass
class SpectrumResult:
    detunings: np.ndarray
    s_total: np.ndarray
    s_coh: np.ndarray
    s_inc: np.ndarray = field(init=False)
    coh_fraction: float = 0.0
    dual_path_error: float = 0.0

    def __post_init__(self):
        self.s_inc = self.s_total - self.s_coh

    def negativity(self):
        """Most negative total-spectrum value relative to its maximum."""
        return float(max(0.0, -np.min(self.s_total)) / np.max(np.abs(self.s_total)))

    def mirrored(self):
        """Spectra on the reflected axis ``delta -> -delta``."""
        out = SpectrumResult(-self.detunings[::-1], self.s_total[::-1].copy(), self.s_coh[::-1].copy(),
                             self.coh_fraction, self.dual_path_error)
        return out


@dataclass
class SimulationResult:
    spectrum: SpectrumResult
    trajectory: object
    correlation: IntegratedCorrelation
    propagator: object


def coherent_fraction(correlation):
    """Coherently scattered share of the frequency-integrated intensity.

    Integrating the one-sided transform over the full band keeps only the
    ``tau = 0`` term, so the fraction is the ratio of the zero-delay values.
    """
    total = correlation.total[0].real
    return 0.0 if total == 0 else float(correlation.coherent[0].real / total)


def simulate(config, detunings=None, rho0=None, check_dual_path=True):
    """Run evolution, regression and transforms for one configuration."""
    if detunings is None:
        detunings = default_detunings(config.pulse.omega0)
    detunings = np.asarray(detunings, dtype=float)
    prop = build_propagator(config)
    traj = evolve(config, rho0, prop)
    corr = integrated_correlation(config, traj, prop)
    taus = config.grid.taus
    if check_dual_path:
        s_tot, err_t = dual_transform(corr.total, taus, detunings)
        s_coh, err_c = dual_transform(corr.coherent, taus, detunings)
        err = max(err_t, err_c)
        if err > DUAL_PATH_TOL:
            raise NumericalError(f"fast and direct transforms disagree by {err:.3g}")
    else:
        s_tot = one_sided_transform(corr.total, taus, detunings)
        s_coh = one_sided_transform(corr.coherent, taus, detunings)
        err = float("nan")
    spec = SpectrumResult(detunings, s_tot, s_coh, coherent_fraction(corr), err)
    return SimulationResult(spec, traj, corr, prop)


def compute_spectra(config, detunings=None, rho0=None):
    return simulate(config, detunings, rho0).spectrum


# --- peak analysis -----------------------------------------------------------

@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    weight: float


def _window_integral(x, y, lo, hi):
    """Trapezoidal integral of samples over ``[lo, hi]`` with interpolated ends."""
    if lo < x[0] - 1e-12 * abs(x[0]) or hi > x[-1] + 1e-12 * abs(x[-1]):
        raise ConfigError(f"window [{lo:.4g}, {hi:.4g}] exceeds the detuning axis")
    inside = (x > lo) & (x < hi)
    xs = np.concatenate(([lo], x[inside], [hi]))
    ys = np.concatenate(([np.interp(lo, x, y)], y[inside], [np.interp(hi, x, y)]))
    return float(np.trapezoid(ys, xs))


def find_peaks(spec, detunings, min_height_frac=0.05, half_width=None):
    """Local maxima above ``min_height_frac * max(spec)``.

    Positions and heights come from a three-point parabola through each
    maximum. ``weight`` integrates the spectrum over ``position +- half_width``
    or, when ``half_width`` is None, over the basin between the neighbouring
    minima.
    """
    if not 0 < min_height_frac < 1:
        raise ValueError("min_height_frac must lie in (0, 1)")
    y = np.asarray(spec, dtype=float)
    x = np.asarray(detunings, dtype=float)
    idx, _ = signal.find_peaks(y, height=min_height_frac * np.max(y))
    peaks = []
    for k in idx:
        y0, y1, y2 = y[k - 1], y[k], y[k + 1]
        den = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        step = 0.5 * (x[k + 1] - x[k - 1])
        pos = x[k] + shift * step
        height = y1 - 0.25 * (y0 - y2) * shift
        if half_width is not None:
            lo = max(pos - half_width, x[0])
            hi = min(pos + half_width, x[-1])
        else:
            left = k
            while left > 0 and y[left - 1] <= y[left]:
                left -= 1
            right = k
            while right < y.size - 1 and y[right + 1] <= y[right]:
                right += 1
            lo, hi = x[left], x[right]
        peaks.append(Peak(float(pos), float(height), _window_integral(x, y, lo, hi)))
    return peaks


def sideband_weights(result, omega_r, half_width=None):
    """Incoherent weights ``(W+, W-)`` in windows centered at ``+-omega_r``.

    The ``+omega_r`` window holds the ``+ -> -`` dressed transition.
    """
    hw = 0.5 * omega_r if half_width is None else half_width
    if not omega_r > 0:
        raise ConfigError("omega_r must be positive")
    if hw >= omega_r:
        raise ConfigError("sideband windows overlap delta = 0")
    x, y = result.detunings, result.s_inc
    return (_window_integral(x, y, omega_r - hw, omega_r + hw),
            _window_integral(x, y, -omega_r - hw, -omega_r + hw))


def sideband_weight_ratio(result, omega_r, half_width=None):
    w_plus, w_minus = sideband_weights(result, omega_r, half_width)
    return w_plus / w_minus


def nearest_peak(peaks, position):
    if not peaks:
        return None
    return min(peaks, key=lambda p: abs(p.position - position))


def value_at(result, delta, which="s_inc"):
    return float(np.interp(delta, result.detunings, getattr(result, which)))
