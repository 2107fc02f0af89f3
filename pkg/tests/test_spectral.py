import numpy as np
import pytest
from hypothesis import given, strategies as st

from dnlslab.lattice import LatticeGrid, Potential, apply_H_values, mass, stagger, LatticeField
from dnlslab.spectral import (
    LAPConvergenceError,
    SpectralError,
    check_generic_edges,
    decay_exponent_experiment,
    discrete_spectrum,
    distorted_ft,
    jost_solutions,
    limiting_absorption,
    outgoing_resolvent,
    parseval_integral,
    pc_project,
    propagate_linear,
    resolvent_solve,
    richardson,
    scattering_states,
    wronskian_profile,
)

G200 = LatticeGrid(200)


@pytest.fixture(scope="module")
def V2():
    return Potential.two_site(G200, 2.68, 1)


@pytest.fixture(scope="module")
def spec2(V2):
    return discrete_spectrum(V2)


def test_free_lattice_has_no_eigenvalues():
    assert discrete_spectrum(Potential.zero(G200)).count == 0


def test_single_site_analytic(single_well):
    spec = discrete_spectrum(single_well)
    assert spec.count == 1
    assert abs(spec.eigenvalues[0] - (2 - np.sqrt(8))) <= 1e-9
    # exponential ansatz: v0 = 2 sinh(kappa)
    assert spec.decay_rates()[0] == pytest.approx(np.arcsinh(1.0), rel=1e-12)


def test_single_site_dense_cross_check():
    g = LatticeGrid(60)
    V = Potential.single_site(g, 2.0)
    d, off = V.hamiltonian_diagonals()
    dense = np.linalg.eigvalsh(np.diag(d) + np.diag(off, 1) + np.diag(off, -1))
    assert abs(discrete_spectrum(V).eigenvalues[0] - dense[0]) < 1e-10


def test_two_site_contract(spec2):
    assert spec2.count == 2
    e1, e2 = spec2.eigenvalues
    assert e1 < e2 < 0
    assert np.all(spec2.residuals() <= 1e-10)
    gram = spec2.eigenfunctions @ spec2.eigenfunctions.T
    assert np.allclose(gram, np.eye(2), atol=1e-12)
    assert spec2.band_margin() > 0


def test_stagger_spectrum(spec2, V2):
    Vm = Potential(G200, -V2.values)
    em = discrete_spectrum(Vm).eigenvalues
    assert np.allclose(np.sort(4 - spec2.eigenvalues), em, atol=1e-10)


def test_pc_project_examples(spec2, rng):
    assert np.linalg.norm(pc_project(spec2.eigenfunctions[0], spec2)) < 1e-14
    assert np.linalg.norm(pc_project(1j * spec2.eigenfunctions[1], spec2)) < 1e-14
    u = rng.normal(size=G200.size) + 1j * rng.normal(size=G200.size)
    p = pc_project(u, spec2)
    assert np.linalg.norm(pc_project(p, spec2) - p) <= 1e-12 * np.linalg.norm(u)


def test_resolvent_off_spectrum_real(V2):
    x = resolvent_solve(-10.0, 0.0, G200.delta(0), V2).solution
    assert abs(np.imag(x[G200.index(0)])) < 1e-15


def test_resolvent_in_band_dirichlet_needs_epsilon(V2):
    with pytest.raises(SpectralError):
        resolvent_solve(2.0, 0.0, G200.delta(0), V2)
    with pytest.raises(ValueError):
        resolvent_solve(2.0, -1.0, G200.delta(0), V2)


@given(st.floats(-3, 7), st.floats(1e-3, 1.0), st.sampled_from(["dirichlet", "transparent"]))
def test_resolvent_residual(omega, eps, boundary):
    g = LatticeGrid(40)
    V = Potential.two_site(g, 2.68, 1)
    f = np.cos(np.arange(g.size)) * np.exp(-0.1 * np.abs(g.sites))
    s = resolvent_solve(omega, eps, f, V, boundary)
    assert s.residual <= 1e-12 * np.linalg.norm(f)


@given(st.floats(0.1, 3.9), st.floats(1e-4, 1.0))
def test_resolvent_conjugate_symmetry(omega, eps):
    g = LatticeGrid(60)
    V = Potential.two_site(g, 2.68, 1)
    f = np.exp(-0.3 * np.abs(g.sites))
    x = resolvent_solve(omega, eps, f, V).solution
    assert np.imag(np.vdot(f, x)) >= -1e-12


def test_free_outgoing_green_function():
    # R_+(2) delta_0 on the free lattice has modulus 1/(2 sin(pi/2)) = 1/2 everywhere
    x = outgoing_resolvent(2.0, G200.delta(0), Potential.zero(G200))
    assert np.allclose(np.abs(x), 0.5, atol=1e-12)
    # the extrapolated epsilon ladder reaches the same modulus at the origin
    lap = limiting_absorption(2.0, G200.delta(0), G200.delta(0), Potential.zero(G200))
    assert abs(abs(lap.value) - 0.5) < 1e-8


def test_lap_rank_one_on_eigenfunction(spec2, V2):
    omega = 1.0
    phi = spec2.eigenfunctions[0]
    g = np.exp(-0.2 * np.abs(G200.sites))
    lap = limiting_absorption(omega, phi, g, V2)
    expected = np.vdot(g, phi) / (spec2.eigenvalues[0] - omega)
    assert abs(lap.value - expected) <= 1e-8 * abs(expected)


def test_lap_zero_and_positive(V2):
    z = np.zeros(G200.size)
    assert limiting_absorption(1.0, z, z, V2).value == 0
    f = np.exp(-0.4 * np.abs(G200.sites))
    assert limiting_absorption(1.0, f, f, V2).value.imag >= -1e-10


def test_lap_convergence_error_when_ladder_too_coarse(V2):
    f = np.exp(-0.4 * np.abs(G200.sites))
    with pytest.raises(LAPConvergenceError):
        limiting_absorption(1.0, f, f, V2, eps0=0.5, order=0)


def test_richardson_exact_on_polynomial():
    h = np.array([1.0, 0.5, 0.25, 0.125])
    vals = 3.0 + 2 * h - h**2 + 0.5 * h**3
    assert richardson(list(vals), 2.0)[-1][-1] == pytest.approx(3.0, abs=1e-12)


def test_jost_free():
    xi = 0.7
    fp, fm = jost_solutions(xi, Potential.zero(G200))
    assert np.allclose(fp.values, np.exp(1j * xi * G200.sites))
    assert np.allclose(fm.values, np.exp(-1j * xi * G200.sites))
    assert fp.wronskian_with_partner == pytest.approx(2j * np.sin(xi))


@given(st.floats(0.05, np.pi - 0.05))
def test_jost_recursion_and_asymptotics(xi):
    g = LatticeGrid(100)
    V = Potential.two_site(g, 2.68, 1)
    fp, fm = jost_solutions(xi, V)
    lam = 2 - 2 * np.cos(xi)
    for f in (fp.values, fm.values):
        r = apply_H_values(f, V.values) - lam * f
        scale = np.max(np.abs(f))
        assert np.max(np.abs(r[1:-1])) <= 1e-10 * scale
    far = g.sites > 5
    assert np.max(np.abs(fp.values[far] - np.exp(1j * xi * g.sites[far]))) < 1e-8
    W = wronskian_profile(xi, V)
    assert np.var(np.abs(W - W[0])) < 1e-20


def test_wronskian_random_interior_sites(rng):
    W = wronskian_profile(1.3, Potential.two_site(G200, 2.68, 1))
    idx = rng.integers(10, W.size - 10, size=100)
    assert np.max(np.abs(W[idx] - W[G200.half_width])) < 1e-10 * abs(W[G200.half_width])


def test_generic_edges(V2):
    ratio = check_generic_edges(V2)
    assert np.all(ratio > 1e-3)


def test_distorted_ft_free_delta():
    vals = distorted_ft(G200.delta(0), np.array([-2.0, -0.3, 0.4, 3.0]), Potential.zero(G200))
    assert np.allclose(vals, 1 / np.sqrt(2 * np.pi), atol=1e-14)


def test_parseval_random_compact(spec2, V2, rng):
    f = np.zeros(G200.size, dtype=complex)
    sl = slice(G200.index(-6), G200.index(6) + 1)
    f[sl] = rng.normal(size=13) + 1j * rng.normal(size=13)
    lhs = mass(pc_project(f, spec2))
    assert abs(parseval_integral(f, V2) - lhs) <= 1e-6 * lhs


def test_parseval_eigenfunction_vanishes(spec2, V2):
    assert parseval_integral(spec2.eigenfunctions[0], V2) < 1e-10


def test_scattering_state_domain(V2):
    with pytest.raises(ValueError):
        scattering_states(0.0, V2)


def test_propagate_examples(spec2, V2, rng):
    u0 = rng.normal(size=G200.size) + 1j * rng.normal(size=G200.size)
    assert np.array_equal(propagate_linear(u0, 0.0, V2), u0)
    assert mass(propagate_linear(u0, 100.0, V2)) == pytest.approx(mass(u0), rel=1e-10)
    phi = spec2.eigenfunctions[0]
    out = propagate_linear(phi, 37.0, V2)
    assert np.linalg.norm(out - np.exp(-1j * spec2.eigenvalues[0] * 37.0) * phi) < 1e-10
    a = propagate_linear(pc_project(u0, spec2), 13.0, V2)
    b = pc_project(propagate_linear(u0, 13.0, V2), spec2)
    assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(u0)


def test_decay_experiment_guards(V2):
    with pytest.raises(ValueError):
        decay_exponent_experiment("sup_norm_l0", V2, 50.0, n_times=3)
    with pytest.raises(ValueError):
        decay_exponent_experiment("sup_norm_l0", V2, 150.0)
    with pytest.raises(ValueError):
        decay_exponent_experiment("nope", V2, 50.0)


def test_decay_small_grid_trend():
    g = LatticeGrid(600)
    fit = decay_exponent_experiment("sup_norm_l0", Potential.zero(g), 280.0, n_times=8)
    assert -0.5 < fit.slope < -0.2
