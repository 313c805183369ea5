"""Acceptance criteria 1-12.

Each test prints and records one ``criterion N: PASS|FAIL ...`` line; the
lines are collected into a summary section at the end of the pytest run.
Run directly with ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, FIG3_PHONONS, GAMMA_FIG1, GAMMA_QD, cw_run, fig3_run, pulsed_run
from pulsedrf import units
from pulsedrf.config import SweepPoint, from_preset
from pulsedrf.cw import asymmetry_ratio, cw_steady_state, mollow_reference
from pulsedrf.drive import PulseSpec, gaussian_fwhm, sidepeak_times
from pulsedrf.lindblad import (
    HERMITICITY_TOL,
    POLARON_POSITIVITY_TOL,
    POSITIVITY_TOL,
    TRACE_TOL,
    build_propagator,
    evolve,
    make_config,
    regression_grid,
)
from pulsedrf.polaron import PhononParams
from pulsedrf.quantum import density_defects
from pulsedrf.report import LIFETIME_FLAG_RATIO, drive_analytics
from pulsedrf.spectrum import DUAL_PATH_TOL, default_detunings, find_peaks, nearest_peak, sideband_weight_ratio, simulate

pytestmark = pytest.mark.acceptance

# sideband ratio W+/W- at the resonant phonon parameters (5pi pulse,
# gamma = 10 ueV, 4 K); frozen after the first verified computation
PHONON_RESONANT_RATIO = 0.4301848589450548
# dynamical sidepeaks sit at 1-2% of the central incoherent maximum
SIDEPEAK_MIN_FRAC = 0.005


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def bin_width(spec):
    return spec.detunings[1] - spec.detunings[0]


def outermost_peaks(spec):
    peaks = find_peaks(spec.s_inc, spec.detunings, SIDEPEAK_MIN_FRAC)
    return min(p.position for p in peaks), max(p.position for p in peaks)


def test_criterion_01_mollow_triplet():
    t0 = time.perf_counter()
    cfg = make_config(PulseSpec("cw", 1.0), 0.0, GAMMA_FIG1, 0.0)
    spec = simulate(cfg, default_detunings(1.0)).spectrum
    runtime = time.perf_counter() - t0
    peaks = find_peaks(spec.s_inc, spec.detunings, 0.05)
    ref = mollow_reference(1.0, GAMMA_FIG1)
    errs = [abs(nearest_peak(peaks, x).position - x) for x in ref.positions]
    ratio = sideband_weight_ratio(spec, 1.0)
    center = nearest_peak(peaks, 0.0).height
    side = 0.5 * (nearest_peak(peaks, -1.0).height + nearest_peak(peaks, 1.0).height)
    ok = (max(errs) <= 2 * bin_width(spec) and abs(ratio - 1) <= 0.02
          and abs(center / side - 3) <= 0.45 and runtime < 60)
    record(1, ok, f"peak offsets {max(errs):.2e} (2 bins {2 * bin_width(spec):.2e}), "
                  f"sideband ratio {ratio:.6f}, center/side {center / side:.3f}, {runtime:.1f} s")
    assert ok


def test_criterion_02_pulse_fwhm():
    fwhm = units.internal_to_ps(gaussian_fwhm(PulseSpec("gaussian", 1.0, 5 * math.pi)))
    ok = abs(fwhm - 9.7) <= 0.05
    record(2, ok, f"FWHM {fwhm:.4f} ps (target 9.7 +- 0.05)")
    assert ok


def test_criterion_03_steady_state_oracle():
    worst = 0.0
    for omega in (0.25, 0.5, 1.0, 2.0, 4.0):
        for delta in (-2.0, -1.0, 0.0, 1.0, 2.0):
            for gp in (0.0, 0.05, 0.1):
                cfg = make_config(PulseSpec("cw", omega), delta, GAMMA_FIG1, gp)
                traj = evolve(cfg)
                ss = cw_steady_state(omega, delta, GAMMA_FIG1, gp)
                k = cfg.grid.offset
                worst = max(worst, np.max(np.abs(traj.sigma_minus_exp[k:] - ss.sigma_minus)),
                            np.max(np.abs(traj.population[k:] - ss.population)))
    ok = worst <= 1e-6
    record(3, ok, f"max |evolved - closed form| {worst:.2e} over 75 points (tol 1e-6)")
    assert ok


def test_criterion_04_detailed_balance():
    ss = cw_steady_state(1.0, 1.0, GAMMA_FIG1, 0.0)
    analytic = asymmetry_ratio(1.0, 1.0, ss)
    _, res = cw_run(1.0, 1.0, GAMMA_FIG1, 0.0)
    numeric = sideband_weight_ratio(res.spectrum, math.sqrt(2))
    ok_a = abs(analytic - 1) <= 1e-8
    ok_n = abs(numeric - 1) <= 0.05
    record(4, ok_a and ok_n, f"analytic ratio - 1 = {analytic - 1:.3e} (tol 1e-8, {'ok' if ok_a else 'not met'}), "
                             f"numeric ratio {numeric:.5f} (tol 0.05, {'ok' if ok_n else 'not met'})")
    assert ok_n
    assert ok_a


def test_criterion_05_dephasing_asymmetry():
    ss = cw_steady_state(1.0, 1.0, GAMMA_FIG1, 0.1)
    analytic = asymmetry_ratio(1.0, 1.0, ss)
    _, res = cw_run(1.0, 1.0, GAMMA_FIG1, 0.1)
    numeric = sideband_weight_ratio(res.spectrum, math.sqrt(2))
    rel = abs(numeric / analytic - 1)
    ok = numeric > 1 and rel <= 0.10
    record(5, ok, f"numeric {numeric:.4f} vs factored {analytic:.4f} (rel gap {rel:.3f}, tol 0.10), ratio > 1: {numeric > 1}")
    assert numeric > 1
    assert rel <= 0.10


def test_criterion_06_symmetry_and_mirror():
    worst_sym = 0.0
    for theta in (2.0, 4.0, 8.0, 16.0):
        spec = pulsed_run(theta, 0.0)[1].spectrum
        m = spec.mirrored()
        for name in ("s_total", "s_coh", "s_inc"):
            a, b = getattr(spec, name), getattr(m, name)
            worst_sym = max(worst_sym, np.max(np.abs(a - b)) / np.max(np.abs(a)))
    worst_mirror = 0.0
    for theta in (4.0, 8.0):
        for gp in (0.0, 0.1):
            plus = pulsed_run(theta, 0.33, GAMMA_FIG1, gp)[1].spectrum
            minus = pulsed_run(theta, -0.33, GAMMA_FIG1, gp)[1].spectrum.mirrored()
            for name in ("s_total", "s_coh", "s_inc"):
                a, b = getattr(plus, name), getattr(minus, name)
                worst_mirror = max(worst_mirror, np.max(np.abs(a - b)) / np.max(np.abs(a)))
    ok = worst_sym <= 1e-3 and worst_mirror <= 1e-6
    record(6, ok, f"resonant asymmetry {worst_sym:.2e} (tol 1e-3), mirror gap {worst_mirror:.2e} (tol 1e-6)")
    assert ok


def test_criterion_07_sidepeak_structure():
    pulse = PulseSpec("gaussian", 1.0, 2 * math.pi)
    targets = [s.omega for s in sidepeak_times(pulse, 10)]
    spec = pulsed_run(2.0, 0.0)[1].spectrum
    peaks = find_peaks(spec.s_inc, spec.detunings, SIDEPEAK_MIN_FRAC)
    tol = 2 * bin_width(spec)
    misses = []
    for w in targets:
        for sign in (1, -1):
            near = nearest_peak(peaks, sign * w)
            if near is None or abs(near.position - sign * w) > tol:
                misses.append(sign * w)
    found = ", ".join(f"{p.position:+.4f}" for p in peaks) or "none"
    record(7, not misses, f"predicted +-{', '.join(f'{w:.4f}' for w in targets)}; "
                          f"incoherent maxima at {found}; unmatched {['%+.4f' % m for m in misses]}")
    assert not misses


def test_criterion_08_long_pulse_convergence():
    errors, flags = [], []
    preset = from_preset("fig1")
    for theta in (8.0, 16.0, 32.0):
        cfg, res = pulsed_run(theta, 0.0)
        lo, hi = outermost_peaks(res.spectrum)
        errors.append(max(abs(hi - 1.0), abs(lo + 1.0)))
        point = SweepPoint(0, theta * math.pi, 0.0, 0.0, 4.0, False)
        flags.append(drive_analytics(preset, point, cfg)["lifetime_flag"])
    monotone = errors[0] > errors[1] > errors[2]
    expected_flags = [units.lifetime_ratio(t * math.pi, 1.0, GAMMA_FIG1) >= LIFETIME_FLAG_RATIO
                      for t in (8.0, 16.0, 32.0)]
    ok = monotone and flags == expected_flags
    record(8, ok, f"outermost |error| {', '.join(f'{e:.4f}' for e in errors)} for 8pi/16pi/32pi; "
                  f"lifetime flags {flags}")
    assert ok


def test_criterion_09_phonon_resonant_asymmetry():
    r_off = sideband_weight_ratio(fig3_run(0.0, False)[1].spectrum, 1.0)
    r_on = sideband_weight_ratio(fig3_run(0.0, True)[1].spectrum, 1.0)
    ok = abs(r_on - 1) > 0.05 and abs(r_off - 1) <= 1e-3 and r_on == pytest.approx(PHONON_RESONANT_RATIO, rel=1e-6)
    record(9, ok, f"W+/W- with phonons {r_on:.5f} (frozen {PHONON_RESONANT_RATIO:.5f}), without {r_off:.9f}")
    assert ok


def test_criterion_10_phonon_detuning_contrast():
    amps = {}
    for delta in (-0.33, 0.33):
        for ph in (False, True):
            spec = fig3_run(delta, ph)[1].spectrum
            window = np.abs(spec.detunings - delta) <= 0.05
            amps[delta, ph] = float(np.max(spec.s_inc[window]))
    ok = amps[-0.33, True] > amps[-0.33, False]
    record(10, ok, f"exciton peak at -0.33: {amps[-0.33, True]:.4g} with vs {amps[-0.33, False]:.4g} without; "
                   f"at +0.33 (recorded): {amps[0.33, True]:.4g} vs {amps[0.33, False]:.4g}")
    assert ok


def test_criterion_11_zero_coupling_reduction():
    pulse = PulseSpec("gaussian", 1.0, 5 * math.pi)
    zero = PhononParams(0.0, FIG3_PHONONS.omega_b, FIG3_PHONONS.temperature, FIG3_PHONONS.kb)
    det = default_detunings(1.0)
    a = simulate(make_config(pulse, -0.33, GAMMA_QD, 0.0, phonon=zero), det).spectrum
    b = fig3_run(-0.33, False)[1].spectrum
    gap = max(np.max(np.abs(getattr(a, n) - getattr(b, n))) / np.max(np.abs(getattr(b, n)))
              for n in ("s_total", "s_coh", "s_inc"))
    ok = gap <= 1e-10
    record(11, ok, f"alpha = 0 polaron path vs plain path, max relative gap {gap:.2e} (tol 1e-10)")
    assert ok


def _step_halving_gap(cfg, det):
    a = simulate(cfg, det).spectrum
    b = simulate(cfg.replace(grid=cfg.grid.refined(2)), det).spectrum
    return float(np.max(np.abs(a.s_total - b.s_total)) / np.max(np.abs(b.s_total)))


def test_criterion_12_property_suite():
    det = default_detunings(1.0)
    cases = [
        make_config(PulseSpec("gaussian", 1.0, 5 * math.pi), 0.33, GAMMA_FIG1, 0.0),
        make_config(PulseSpec("gaussian", 1.0, 5 * math.pi), 0.33, GAMMA_QD, 0.0, phonon=FIG3_PHONONS),
        make_config(PulseSpec("cw", 1.0), 1.0, GAMMA_FIG1, 0.1),
    ]
    worst = dict(trace=0.0, herm=0.0, neg=0.0, regression=0.0, dual=0.0, halving=0.0)
    ok = True
    for cfg in cases:
        res = simulate(cfg, det)
        herm, tr, mineig = density_defects(res.trajectory.rho)
        worst["trace"] = max(worst["trace"], float(tr.max()))
        worst["herm"] = max(worst["herm"], float(herm.max()))
        worst["neg"] = max(worst["neg"], float(max(0.0, -mineig.min())))
        pos_tol = POLARON_POSITIVITY_TOL if cfg.phonon is not None else POSITIVITY_TOL
        ok &= tr.max() <= TRACE_TOL and herm.max() <= HERMITICITY_TOL and -mineig.min() <= pos_tol
        # regression identity: the pooled tau = 0 value is the weighted population
        g = cfg.grid
        w = np.full(g.n_t, g.dt)
        w[[0, -1]] *= 0.5
        pop = w @ res.trajectory.population[g.row_starts]
        worst["regression"] = max(worst["regression"], abs(res.correlation.total[0] - pop) / pop)
        worst["dual"] = max(worst["dual"], res.spectrum.dual_path_error)
        worst["halving"] = max(worst["halving"], _step_halving_gap(cfg, det))
    # full-grid identity on a small case
    small = make_config(PulseSpec("gaussian", 1.0, 2 * math.pi), 0.33, 0.2, 0.05)
    prop = build_propagator(small)
    traj = evolve(small, propagator=prop)
    corr = regression_grid(small, traj, prop)
    worst["regression"] = max(worst["regression"],
                              float(np.max(np.abs(corr.g[:, 0] - traj.population[small.grid.row_starts]))))
    ok &= worst["regression"] <= 1e-10 and worst["dual"] <= DUAL_PATH_TOL and worst["halving"] <= 1e-7
    record(12, bool(ok), ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
