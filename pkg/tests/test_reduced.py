import numpy as np
import pytest
from hypothesis import given, strategies as st

from dnlslab.harness import default_potential
from dnlslab.modulation import envelope, envelope_window
from dnlslab.reduced import (
    ReducedConfig,
    ReducedState,
    hamiltonian,
    integrate_reduced,
    rate_equations_rhs,
    reduced_rate_fit,
    rhs_rates,
    vector_field,
    y_ansatz,
    y_ansatz_residual,
)
from dnlslab.resonance import classify_resonance, gamma_closed_form, leading_G
from dnlslab.spectral import discrete_spectrum, pc_project, propagate_linear


@pytest.fixture(scope="module")
def small():
    V = default_potential(300)
    spec = discrete_spectrum(V)
    rep = classify_resonance(spec)
    G = leading_G(spec, rep.N0)
    return V, spec, rep, G


def cfg_of(small, **kw):
    V, spec, rep, G = small
    return ReducedConfig.from_spectrum(spec, V, G, rep.N0, **kw)


def packet(spec, amp):
    g = spec.grid
    x = amp * np.exp(-0.05 * g.sites**2 + 0.8j * g.sites)
    return pc_project(x, spec)


def test_G_projected_on_construction(small):
    cfg = cfg_of(small)
    spec = small[1]
    assert np.linalg.norm(pc_project(cfg.G, spec) - cfg.G) <= 1e-10
    with pytest.raises(ValueError):
        cfg_of(small, drop_remainders=False)


def test_rate_arithmetic():
    r1, r2 = rate_equations_rhs(0.1, 0.1, 1.0, 4)
    assert r1 == pytest.approx(6e-14, rel=1e-12) and r2 == pytest.approx(-8e-14, rel=1e-12)
    assert rate_equations_rhs(0.1, 0.0, 1.0, 4) == (0.0, 0.0)


def test_decoupled_linear_system(small):
    V, spec, rep, _ = small
    cfg = ReducedConfig.from_spectrum(spec, V, np.zeros(V.grid.size), rep.N0, include_eta_nonlinearity=False)
    eta0 = packet(spec, 0.05)
    s0 = ReducedState(0.05, 0.03j, eta0)
    T = 20.0
    ser = integrate_reduced(s0, cfg, 0.05, T, record_stride=400)
    assert abs(ser.z1[-1] - np.exp(-1j * cfg.e1 * T) * 0.05) <= 1e-13
    assert abs(ser.z2[-1] - np.exp(-1j * cfg.e2 * T) * 0.03j) <= 1e-13
    assert np.linalg.norm(ser.final.eta - propagate_linear(eta0, T, V)) <= 1e-10
    assert np.ptp(ser.eta_mass) <= 1e-10 * ser.eta_mass[0]


def test_z2_zero_invariant(small):
    cfg = cfg_of(small)
    ser = integrate_reduced(ReducedState(0.1, 0.0, np.zeros(cfg.G.size)), cfg, 0.05, 50.0, record_stride=50)
    assert np.all(ser.z2 == 0)
    assert np.ptp(np.abs(ser.z1)) <= 1e-14


@given(st.integers(0, 10**6))
def test_vector_field_is_hamiltonian(seed):
    rng = np.random.default_rng(seed)
    V = default_potential(30)
    spec = discrete_spectrum(V)
    rep = classify_resonance(spec)
    cfg = ReducedConfig.from_spectrum(spec, V, leading_G(spec, rep.N0), rep.N0)
    eta = pc_project(0.2 * (rng.normal(size=V.grid.size) + 1j * rng.normal(size=V.grid.size)), spec)
    z1, z2 = 0.3 * complex(*rng.normal(size=2)), 0.3 * complex(*rng.normal(size=2))
    st_ = ReducedState(z1, z2, eta)
    dz1, dz2, deta = vector_field(st_, cfg)
    h = 1e-6

    def grad_z(which):
        out = []
        for d in (h, 1j * h):
            a = ReducedState(z1 + d * (which == 1), z2 + d * (which == 2), eta)
            b = ReducedState(z1 - d * (which == 1), z2 - d * (which == 2), eta)
            out.append((hamiltonian(a, cfg) - hamiltonian(b, cfg)) / (2 * h))
        return out[0] + 1j * out[1]

    # z' = -i (d/dRe + i d/dIm) H_red
    assert abs(dz1 - (-1j) * grad_z(1)) <= 1e-7
    assert abs(dz2 - (-1j) * grad_z(2)) <= 1e-7
    # eta' restricted to Ran P_c, compared along a P_c direction
    w = pc_project(rng.normal(size=eta.size) + 1j * rng.normal(size=eta.size), spec)
    dH = (hamiltonian(ReducedState(z1, z2, eta + h * w), cfg) - hamiltonian(ReducedState(z1, z2, eta - h * w), cfg)) / (2 * h)
    # dH/dw = Re <grad, w> with eta' = -i grad
    grad = 1j * deta
    assert abs(dH - np.real(np.vdot(w, grad))) <= 1e-6


def test_rhs_rates_match_vector_field(small):
    cfg = cfg_of(small)
    eta = packet(small[1], 0.01)
    st_ = ReducedState(0.07 * np.exp(0.3j), 0.05, eta)
    dz1, dz2, _ = vector_field(st_, cfg)
    r1, r2 = rhs_rates(st_.z1, st_.z2, eta, cfg)
    assert r1 == pytest.approx(2 * np.real(np.conj(st_.z1) * dz1), rel=1e-10)
    assert r2 == pytest.approx(2 * np.real(np.conj(st_.z2) * dz2), rel=1e-10)
    cfg4 = cfg.N0
    assert abs(cfg4 * r1 + (cfg4 - 1) * r2) <= 4 * np.finfo(float).eps * cfg4 * abs(r1)


def test_y_ansatz_stationarity_residual(small):
    cfg = cfg_of(small)
    r1 = y_ansatz_residual(0.05, 0.05, cfg, 1e-2)
    r2 = y_ansatz_residual(0.05, 0.05, cfg, 1e-3)
    assert r2 < r1 and r2 < 1e-2
    assert y_ansatz_residual(0.05, 0.0, cfg, 1e-3) == 0.0
    assert np.all(y_ansatz(0.05, 0.0, cfg) == 0)


def test_reduced_transfer(small):
    """Amplitude 0.1: transfer direction, conservation of N0|z1|^2+(N0-1)|z2|^2 to 1%, eta near Y."""
    V, spec, rep, G = small
    cfg = cfg_of(small)
    ser = integrate_reduced(ReducedState(0.1, 0.1, np.zeros(V.grid.size)), cfg, 0.05, 120.0, record_stride=4,
                            track_y=True)
    q = ser.almost_conserved
    assert np.ptp(q) / q[0] < 0.01
    assert np.max(np.abs(ser.total_mass - ser.total_mass[0])) <= 1e-8 * ser.total_mass[0]
    late = ser.times > 60
    assert np.max(ser.y_distance[late]) < 0.3
    w = envelope_window(cfg.e1, cfg.e2)
    r2 = envelope(ser.rate2, ser.times, w)[late]
    r1 = envelope(ser.rate1, ser.times, w)[late]
    assert np.all(r2 <= 0) and np.all(r1 >= 0)
    gamma = gamma_closed_form(G, rep, V)
    fit = reduced_rate_fit(ser, gamma, cfg.e1, cfg.e2, t_min=60.0)
    assert fit.relative_error_z2 <= 0.2


def test_series_csv(small, tmp_path):
    cfg = cfg_of(small)
    ser = integrate_reduced(ReducedState(0.05, 0.05, np.zeros(cfg.G.size)), cfg, 0.05, 1.0, record_stride=5)
    ser.to_csv(tmp_path / "r.csv")
    assert len((tmp_path / "r.csv").read_text().splitlines()) == len(ser.times) + 1
