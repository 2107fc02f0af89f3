"""The twelve acceptance criteria at their stated tolerances.

Each test prints (and records for the terminal summary) one PASS/FAIL line
with its numeric evidence, then asserts. Criteria 5, 6, 8-11 run long
experiments (about fifteen minutes in total on one core).

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from dnlslab.bound_states import continue_branch
from dnlslab.dynamics import IntegratorConfig, build_step_cache, run, step
from dnlslab.harness import default_potential, mixed_initial_data, run_experiment
from dnlslab.lattice import LatticeGrid, Potential
from dnlslab.modulation import decompose, reconstruct
from dnlslab.reduced import rate_equations_rhs
from dnlslab.resonance import classify_resonance, gamma_closed_form, gamma_oracle, leading_G
from dnlslab.spectral import decay_exponent_experiment, discrete_spectrum, pc_project


def test_c01_spectral_correctness(acceptance):
    tic = time.perf_counter()
    spec = discrete_spectrum(Potential.single_site(LatticeGrid(1000), 2.0))
    wall = time.perf_counter() - tic
    err = abs(spec.eigenvalues[0] - (2 - np.sqrt(4 + 2.0**2)))
    ok = spec.count == 1 and err <= 1e-9 and wall < 5
    acceptance(1, ok, f"|e - (2 - sqrt 8)| = {err:.2e} (tol 1e-9), runtime {wall:.2f} s (< 5 s)")
    assert ok


def test_c02_gamma_dual_method(acceptance):
    tic = time.perf_counter()
    V = default_potential(1000)
    spec = discrete_spectrum(V)
    rep = classify_resonance(spec)
    G = leading_G(spec, rep.N0)
    closed = gamma_closed_form(G, rep, V)
    oracle = gamma_oracle(G, rep, V)
    wall = time.perf_counter() - tic
    gap = abs(closed - oracle) / abs(oracle)
    ok = gap <= 1e-5 and wall < 30
    acceptance(2, ok, f"closed {closed:.10e} vs oracle {oracle:.10e}: relative gap {gap:.2e} (tol 1e-5), "
                      f"runtime {wall:.2f} s (< 30 s)")
    assert ok


def test_c03_bound_state_branch(acceptance, coeffs):
    V = default_potential(1000)
    spec = discrete_spectrum(V)
    parts, ok = [], True
    for j in (1, 2):
        br = continue_branch(j, 1e-2, 60, V, coeffs, spec)
        res = float(br.residuals.max())
        slope = br.scaling_slope(1e-2, 1e-1)
        ok &= res <= 1e-12 and abs(slope - 6.0) <= 0.2 and br.truncated == ""
        parts.append(f"branch {j}: max residual {res:.1e}, slope {slope:.4f}")
    acceptance(3, ok, "; ".join(parts) + " (tol 1e-12, 6.0 +- 0.2)")
    assert ok


def test_c04_integrator_quality(acceptance, V500, coeffs, spec500, branches500):
    u0 = mixed_initial_data(spec500, branches500, 0.1 / np.sqrt(2), 0.1 / np.sqrt(2))
    dt, T = 0.005, 1000.0
    rec = run(u0, IntegratorConfig(T, dt=dt, record_stride=1000), V500, coeffs, store_snapshots=False)
    mass_drift = rec.relative_mass_drift()
    energy_drift = rec.energy_drift()
    # dt-halving on the same run: ||u_dt - u_dt/2|| / ||u_dt/2 - u_dt/4|| at T
    finals = [rec.final] + [
        step(u0, h, V500, coeffs, build_step_cache(V500, h), n_steps=int(round(T / h))) for h in (dt / 2, dt / 4)
    ]
    a, b = np.linalg.norm(finals[0] - finals[1]), np.linalg.norm(finals[1] - finals[2])
    ratio = a / b
    ok = mass_drift <= 1e-11 and energy_drift <= 1e-8 and 3.5 <= ratio <= 4.5
    acceptance(4, ok, f"mass drift {mass_drift:.1e} (tol 1e-11), energy drift {energy_drift:.1e} (tol 1e-8), "
                      f"dt-halving ratio {ratio:.3f} from differences {a:.2e}, {b:.2e} (tol [3.5, 4.5])")
    assert ok


@pytest.fixture(scope="module")
def V4000():
    return default_potential(4000)


def test_c05_dispersive_decay(acceptance, V4000):
    fit = decay_exponent_experiment("sup_norm_l0", V4000, 800.0)
    ok = abs(fit.slope + 1 / 3) <= 0.1
    acceptance(5, ok, f"l^inf exponent {fit.slope:.4f} (target -1/3 +- 0.1), N = 4000, t in [80, 800]")
    assert ok


def test_c06_weighted_decay(acceptance, V4000):
    fit = decay_exponent_experiment("weighted_l4", V4000, 800.0)
    ok = abs(fit.slope + 1.5) <= 0.2
    acceptance(6, ok, f"l^(2,-4) exponent {fit.slope:.4f} (target -1.5 +- 0.2), N = 4000, t in [80, 800]")
    assert ok


def test_c07_reduced_fgr(acceptance, tmp_path):
    man = run_experiment({"experiment": "reduced"}, tmp_path)
    r = man["result"]
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        z1, z2 = complex(*rng.normal(size=2)) * 0.2, complex(*rng.normal(size=2)) * 0.2
        N0 = int(rng.integers(2, 8))
        r1, r2 = rate_equations_rhs(z1, z2, float(rng.uniform(0, 5)), N0)
        if r1:
            worst = max(worst, abs(N0 * r1 + (N0 - 1) * r2) / (N0 * abs(r1)))
    ok = r["relative_error_z2"] <= 0.2 and worst <= 4 * np.finfo(float).eps
    acceptance(7, ok, f"amplitude 0.05: envelope d|z2|^2/dt slope {r['slope_z2']:.5e} vs -2 N0 Gamma "
                      f"{r['predicted_z2']:.5e}, relative error {r['relative_error_z2']:.1e} (tol 0.2); "
                      f"balance N0 rhs1 + (N0-1) rhs2 worst {worst:.1e} relative (rounding only)")
    assert ok


@pytest.fixture(scope="module")
def equipartition(tmp_path_factory):
    return run_experiment({"experiment": "equipartition"}, tmp_path_factory.mktemp("equipartition"))


def test_c08_stabilization(acceptance, equipartition):
    rows = equipartition["result"]["runs"]
    ok = all(r["converged"] for r in rows)
    T = equipartition["config"]["params"]["t_max"]
    detail = ", ".join(
        f"eps {r['epsilon']}: dying max {r['dying_tail_max']:.2e} vs {1e-3 * r['epsilon']:.0e}, "
        f"tail fraction {r['interaction_tail_fraction']:.2f}" for r in rows)
    acceptance(8, ok, f"t_max {T:g}: {detail} (need dying < 1e-3 eps and tail < 0.1)")
    assert ok


def test_c09_almost_conservation(acceptance, equipartition):
    rows = equipartition["result"]["runs"]
    C = np.array([r["conservation_C"] for r in rows])
    C_fit = float(np.median(C))
    spread = float(np.max(np.abs(C / C_fit - 1)))
    ok = spread <= 0.5
    detail = ", ".join(f"eps {r['epsilon']}: drift {r['conservation_drift']:.2e}, C {r['conservation_C']:.2e}"
                       for r in rows)
    acceptance(9, ok, f"{detail}; fitted C {C_fit:.2e}, spread {spread:.2f} (tol 0.5)")
    assert ok


def test_c10_equipartition_scaling(acceptance, equipartition):
    rows = equipartition["result"]["runs"]
    slope = equipartition["result"]["residual_exponent"]
    ok = slope >= 3.5
    detail = ", ".join(f"eps {r['epsilon']}: |rho+^2 - predicted| {r['residual_squared_reading']:.2e}" for r in rows)
    acceptance(10, ok, f"{detail}; fitted exponent {slope:.3f} (need >= 3.5)")
    assert ok


def test_c11_instability_witness(acceptance, tmp_path):
    man = run_experiment({"experiment": "instability"}, tmp_path)
    checks = {c["name"]: c["passed"] for c in man["checks"]}
    ok = all(checks.values())
    T = man["config"]["params"]["t_max"]
    detail = ", ".join(f"seed {r['seed_frac']:g}: exit {r['exit_time']}, max distance {r['max_distance']:.2e}"
                       for r in man["result"]["runs"])
    acceptance(11, ok, f"t_max {T:g}, orbit radius {man['result']['runs'][0]['eps_orbit']:g}: {detail}")
    assert ok


def test_c12_projector_decomposition(acceptance, spec500, branches500):
    rng = np.random.default_rng(2024)
    g = spec500.grid
    u = rng.normal(size=g.size) + 1j * rng.normal(size=g.size)
    p = pc_project(u, spec500)
    idem = np.linalg.norm(pc_project(p, spec500) - p) / np.linalg.norm(u)
    eps = 0.05
    r = np.zeros(g.size, dtype=complex)
    sl = slice(g.index(-10), g.index(10) + 1)
    r[sl] = rng.normal(size=21) + 1j * rng.normal(size=21)
    r = pc_project(r, spec500)
    data = mixed_initial_data(spec500, branches500, 0.6 * eps, 0.8j * eps) + 0.2 * eps * r / np.linalg.norm(r)
    st = decompose(data, branches500, spec500)
    th = 1.234
    sg = decompose(np.exp(1j * th) * data, branches500, spec500)
    ph = np.exp(1j * th)
    gauge = max(abs(sg.z1 - ph * st.z1), abs(sg.z2 - ph * st.z2), np.linalg.norm(sg.eta - ph * st.eta))
    trip = np.linalg.norm(reconstruct(st, branches500) - data)
    ok = idem <= 1e-12 and gauge <= 1e-10 and trip <= 1e-8
    acceptance(12, ok, f"P_c idempotency {idem:.1e} (tol 1e-12), gauge equivariance {gauge:.1e} (tol 1e-10), "
                       f"round trip {trip:.1e} at eps 0.05 (tol 1e-8)")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
