"""Per-point analysis summaries and deterministic serialisation."""

from dataclasses import replace
import io
import json
import math

import numpy as np

from . import __version__, units
from .config import describe_units, detuning_axis, sim_config_for
from .drive import adiabaticity_max, sidepeak_times
from .lindblad import (
    HERMITICITY_TOL,
    POLARON_POSITIVITY_TOL,
    POSITIVITY_TOL,
    TRACE_TOL,
    ConfigError,
)
from .spectrum import DUAL_PATH_TOL, find_peaks, sideband_weight_ratio, simulate

# Theta / (omega0/gamma) above which the pulse is no longer short compared
# with the radiative lifetime and dynamical features mix with cw physics.
LIFETIME_FLAG_RATIO = 0.5
PEAK_MIN_FRAC = 0.05


def _f(x):
    return None if x is None else float(x)


def _time_out(cfg, t):
    return units.internal_to_ps(t) if cfg.mode == "qd-units" else float(t)


def point_parameters(cfg, point):
    return {
        "name": point.name,
        "theta": point.theta,
        "theta_over_pi": point.theta / math.pi,
        "delta": point.delta,
        "gamma_prime": point.gamma_prime,
        "temperature": point.temperature if point.phonons else None,
        "phonons": point.phonons,
    }


def point_config(cfg, point):
    """Single-point :class:`RunConfig` reproducing ``point``."""
    return replace(cfg, thetas=(point.theta,), detunings=(point.delta,),
                   gamma_primes=(point.gamma_prime,), temperatures=(point.temperature,),
                   phonons=(point.phonons,))


def analyze_spectrum(cfg, point, spec):
    peaks = find_peaks(spec.s_inc, spec.detunings, PEAK_MIN_FRAC)
    omega_r = math.hypot(cfg.omega0, point.delta)
    try:
        ratio = sideband_weight_ratio(spec, omega_r)
    except ConfigError:
        ratio = None
    out = {
        "coh_fraction": float(spec.coh_fraction),
        "dual_path_error": float(spec.dual_path_error),
        "negativity": spec.negativity(),
        "omega_r": omega_r,
        "sideband_ratio": _f(ratio),
        "peaks": [{"position": p.position, "height": p.height, "weight": p.weight} for p in peaks],
    }
    return out


def drive_analytics(cfg, point, sim):
    pulse = sim.pulse
    out = {"adiabaticity_max": None, "sidepeaks": [], "lifetime_ratio": None, "lifetime_flag": False}
    if pulse.shape == "cw":
        return out
    ratio = units.lifetime_ratio(point.theta, cfg.omega0, cfg.gamma) if cfg.gamma > 0 else 0.0
    out["lifetime_ratio"] = ratio
    out["lifetime_flag"] = bool(ratio >= LIFETIME_FLAG_RATIO)
    if pulse.shape == "gaussian":
        value, t_max = adiabaticity_max(pulse, point.delta)
        out["adiabaticity_max"] = value
        out["adiabaticity_argmax"] = _time_out(cfg, t_max - pulse.t_center)
        out["sidepeaks"] = [{"n": s.n, "t": _time_out(cfg, s.t), "omega": s.omega}
                            for s in sidepeak_times(pulse, 64)]
    return out


def grid_summary(cfg, sim):
    g = sim.grid
    return {
        "t_start": _time_out(cfg, g.t_start), "t_end": _time_out(cfg, g.t_end), "n_t": g.n_t,
        "tau_max": _time_out(cfg, g.tau_max), "n_tau": g.n_tau, "substeps": g.substeps,
        "h": _time_out(cfg, g.h),
    }


TOLERANCES = {
    "trace": TRACE_TOL, "hermiticity": HERMITICITY_TOL, "positivity": POSITIVITY_TOL,
    "positivity_phonons": POLARON_POSITIVITY_TOL, "dual_path": DUAL_PATH_TOL,
}


def run_point(cfg, point):
    """Simulate one sweep point. Returns ``(spectrum, metadata)``."""
    sim = sim_config_for(cfg, point)
    det = detuning_axis(cfg)
    res = simulate(sim, det)
    spec = res.spectrum
    meta = {
        "version": __version__,
        "point": point_parameters(cfg, point),
        "run_config": point_config(cfg, point).to_dict(),
        "units": describe_units(cfg),
        "grid": grid_summary(cfg, sim),
        "tolerances": TOLERANCES,
        "analysis": analyze_spectrum(cfg, point, spec),
        "drive": drive_analytics(cfg, point, sim),
    }
    return spec, meta


def spectrum_csv(spec):
    buf = io.StringIO()
    data = np.column_stack((spec.detunings, spec.s_total, spec.s_coh, spec.s_inc))
    np.savetxt(buf, data, fmt="%.17g", delimiter=",", header="delta,s_total,s_coh,s_inc", comments="")
    return buf.getvalue()


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")
