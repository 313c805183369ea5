import math

import numpy as np
import pytest
from scipy import integrate, optimize

from pulsedrf import units
from pulsedrf.drive import PulseSpec
from pulsedrf.lindblad import make_config
from pulsedrf.polaron import (
    KernelGridError,
    PhononParams,
    build_kernels,
    default_tau_grid,
    memory_weights,
    phonon_correlation,
    polaron_dissipator,
    polaron_superop,
    spectral_function,
)
from pulsedrf.quantum import unvec, vec

LAB = PhononParams.from_lab(0.06, 1.0, 4.0)
# frozen after agreement with the adaptive-quadrature oracle below
B_AVG_4K = 0.9120867670892556
PHI0_4K = 0.18404030816202577
# phi at tau = 1 ps, lab parameters, from the adaptive-quadrature oracle
PHI_1PS_4K = complex(0.014760686627942108, -0.08315729670722721)


def phi_oracle(params, tau):
    """Adaptive quadrature of the bath correlation on the semi-infinite axis."""
    wb, kt = params.omega_b, params.kt

    def re(w):
        env = params.alpha * w * math.exp(-w * w / (2 * wb * wb))
        if kt == 0:
            c = 1.0
        else:
            c = 2 * kt / w if w < 1e-8 * kt else 1 / math.tanh(w / (2 * kt))
        return env * c * math.cos(w * tau)

    def im(w):
        return -params.alpha * w * math.exp(-w * w / (2 * wb * wb)) * math.sin(w * tau)

    opts = dict(limit=2000, epsabs=1e-14, epsrel=1e-13)
    return complex(integrate.quad(re, 0, np.inf, **opts)[0], integrate.quad(im, 0, np.inf, **opts)[0])


@pytest.fixture(scope="module")
def lab_kernels():
    return build_kernels(LAB, default_tau_grid(LAB, 0.02))


def test_parameter_conversion():
    assert LAB.alpha == pytest.approx(0.06 / units.HBAR_MEV_PS**2, rel=1e-15)
    assert LAB.kt == pytest.approx(4 * 0.08617333)
    # J(1 meV) is 0.0364 in ps^2 meV^3 and 0.0840 meV in internal units
    assert 0.06 * math.exp(-0.5) == pytest.approx(0.0364, abs=5e-5)
    assert spectral_function(LAB, 1.0) == pytest.approx(0.0840, abs=5e-5)
    with pytest.raises(ValueError):
        PhononParams(-1.0, 1.0, 4.0)


def test_spectral_function_peak():
    res = optimize.minimize_scalar(lambda w: -spectral_function(LAB, w), bounds=(0.1, 5), method="bounded",
                                   options={"xatol": 1e-10})
    assert res.x == pytest.approx(math.sqrt(3) * LAB.omega_b, rel=1e-6)


@pytest.mark.parametrize("temperature", [0.0, 4.0, 20.0])
def test_phi_matches_adaptive_quadrature(temperature):
    p = PhononParams(LAB.alpha, LAB.omega_b, temperature)
    taus = np.array([0.0, 0.3, 1.0, 2.5, 7.0, 15.0])
    got = phonon_correlation(p, taus)
    ref = np.array([phi_oracle(p, t) for t in taus])
    assert np.max(np.abs(got - ref)) <= 1e-10 * abs(ref[0])


def test_phi_one_picosecond():
    got = phonon_correlation(LAB, units.ps_to_internal(1.0))
    assert abs(got - PHI_1PS_4K) <= 1e-10 * PHI0_4K
    assert abs(phi_oracle(LAB, units.ps_to_internal(1.0)) - PHI_1PS_4K) <= 1e-14


def test_uniform_and_scattered_paths_agree():
    taus = 0.01 * np.arange(1500)
    fast = phonon_correlation(LAB, taus)
    slow = np.array([phonon_correlation(LAB, t) for t in taus[::97]])
    assert np.max(np.abs(fast[::97] - slow)) <= 1e-12


def test_lab_kernels(lab_kernels):
    k = lab_kernels
    assert k.b_avg == pytest.approx(B_AVG_4K, rel=1e-12)
    assert k.phi[0].real == pytest.approx(PHI0_4K, rel=1e-12)
    assert k.b_avg == pytest.approx(math.exp(-0.5 * k.phi[0].real), rel=1e-15)
    assert abs(k.phi[0].imag) <= 1e-15
    assert k.tau_cutoff == pytest.approx(6.99, abs=0.02)
    assert np.abs(k.phi[k.n_cut:]).max() <= 1e-5 * abs(k.phi[0])
    assert np.allclose(k.g_u, k.b_avg**2 * np.sinh(k.phi), rtol=0, atol=1e-15)


def test_b_avg_decreases_with_temperature():
    vals = [math.exp(-0.5 * phonon_correlation(PhononParams(LAB.alpha, 1.0, t), 0.0).real)
            for t in (0.0, 1.0, 4.0, 10.0, 20.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(0 < v < 1 for v in vals)


def test_weak_coupling_series():
    p = PhononParams(LAB.alpha * 1e-3, 1.0, 4.0)
    k = build_kernels(p, default_tau_grid(p, 0.02))
    phi = k.phi[:k.n_cut]
    b2 = k.b_avg**2
    scale = abs(phi[0])
    assert np.max(np.abs(k.g_u[:k.n_cut] - b2 * phi)) <= 1e-6 * scale
    assert np.max(np.abs(k.g_g[:k.n_cut] - 0.5 * b2 * phi**2)) <= 1e-6 * scale**2


def test_zero_coupling():
    p = PhononParams(0.0, 1.0, 4.0)
    k = build_kernels(p, default_tau_grid(p, 0.02))
    assert k.b_avg == 1.0
    assert np.all(k.g_g == 0) and np.all(k.g_u == 0)
    assert np.all(polaron_superop(k, np.array([0.0, 1.0]), 0.3) == 0)


def test_memory_weights_exact_for_quadratics():
    n, step = 101, 0.01
    x = step * np.arange(n)
    w = memory_weights(n, step)
    for f, exact in ((np.ones_like(x), 1.0), (x, 0.5), (x**2, 1 / 3)):
        assert w @ f == pytest.approx(exact, abs=1e-14)
    assert memory_weights(4, 0.5).tolist() == [0.25, 0.5, 0.5, 0.25]


def test_superop_matches_direct_dissipator(lab_kernels, rng):
    pulse = PulseSpec("gaussian", 1.0, 5 * math.pi)
    cfg = make_config(pulse, 0.33, 0.01, 0.0, phonon=LAB)
    for t in (-6.0, -1.3, 0.0, 2.2):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        omega = np.array(float(pulse.omega0 * math.exp(-(t / pulse.width) ** 2)))
        sup = unvec(polaron_superop(lab_kernels, omega, cfg.delta) @ vec(rho))
        direct = polaron_dissipator(cfg, lab_kernels, rho, t)
        assert np.max(np.abs(sup - direct)) <= 1e-13
        assert abs(np.trace(direct)) <= 1e-14
        assert np.max(np.abs(direct - direct.conj().T)) <= 1e-14


def test_superop_trace_preserving_and_undriven(lab_kernels):
    omegas = np.linspace(0, 3, 31)
    sup = polaron_superop(lab_kernels, omegas, 0.33)
    trace_row = vec(np.eye(2))
    assert np.max(np.abs(trace_row @ sup)) <= 1e-14
    assert np.all(sup[0] == 0)


def test_grid_too_short_rejected():
    with pytest.raises(KernelGridError, match="before the kernels decay"):
        build_kernels(LAB, 0.01 * np.arange(200))
    with pytest.raises(KernelGridError, match="too coarse"):
        build_kernels(LAB, 1.0 * np.arange(40))
    with pytest.raises(KernelGridError):
        build_kernels(LAB, np.array([0.5, 1.0]))
