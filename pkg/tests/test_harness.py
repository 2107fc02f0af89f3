import json

import numpy as np
import pytest

from dnlslab.cli import main
from dnlslab.harness import (
    DEFAULT_TEST_POTENTIAL,
    ConfigError,
    find_test_potential,
    run_experiment,
    validate_config,
)
from dnlslab.lattice import LatticeGrid
from dnlslab.harness import build_potential
from dnlslab.resonance import classify_resonance
from dnlslab.spectral import SpectralError, discrete_spectrum


@pytest.fixture(scope="module")
def scan4():
    return find_test_potential(4)


def test_scan_reproduces_frozen_default(scan4):
    assert (scan4["kind"], scan4["v0"], scan4["d"]) == (
        DEFAULT_TEST_POTENTIAL["kind"], DEFAULT_TEST_POTENTIAL["v0"], DEFAULT_TEST_POTENTIAL["d"])


def test_scan_result_reverified(scan4):
    V = build_potential(scan4, LatticeGrid(1000))
    rep = classify_resonance(discrete_spectrum(V))
    assert rep.N0 == 4 and 0 < rep.omega_table[4] < 4
    assert rep.e1 < rep.e2 < 0


def test_scan_deterministic():
    kw = dict(v0_values=np.round(np.arange(2.0, 3.5, 0.05), 2), d_values=(1,), half_width=100)
    assert find_test_potential(4, **kw) == find_test_potential(4, **kw)


def test_scan_errors():
    with pytest.raises(ValueError):
        find_test_potential(1)
    with pytest.raises(SpectralError):
        find_test_potential(4, v0_values=[0.6, 0.7], d_values=(1,), half_width=50)


def test_validation_rejects_unknown_and_bad_fields():
    with pytest.raises(ConfigError, match="params/dt"):
        validate_config({"experiment": "simulate", "params": {"dt": -0.1}})
    with pytest.raises(ConfigError, match="bogus"):
        validate_config({"experiment": "spectrum", "bogus": 1})
    with pytest.raises(ConfigError):
        validate_config({"experiment": "nope"})
    with pytest.raises(ConfigError, match="absorber"):
        validate_config({"experiment": "simulate", "N": 100, "params": {"absorber": {"width": 30}}})
    with pytest.raises(ConfigError, match="nonlinearity"):
        validate_config({"experiment": "gamma", "nonlinearity": {"2": 0.1}})
    assert validate_config({"experiment": "gamma", "nonlinearity": {"4": 0.1, "10": 0.0}})["nonlinearity"]


def test_defaults_filled():
    cfg = validate_config({"experiment": "equipartition"})
    assert cfg["N"] == 500 and cfg["params"]["epsilons"] == [0.04, 0.06, 0.08]
    assert cfg["potential"] == {"kind": "default"}


def test_spectrum_experiment(tmp_path):
    man = run_experiment({"experiment": "spectrum", "potential": {"kind": "single_site", "v0": 2.0}}, tmp_path)
    assert man["schema"] == 1
    assert man["result"]["eigenvalues"][0] == pytest.approx(-0.828427, abs=1e-6)
    assert (tmp_path / "manifest.json").exists() and (tmp_path / "phi_1.csv").exists()


def test_gamma_experiment(tmp_path):
    man = run_experiment({"experiment": "gamma"}, tmp_path)
    r = man["result"]
    assert r["relative_gap"] <= 1e-5
    assert {"gamma_closed_form", "gamma_oracle", "relative_gap"} <= set(r)
    assert all(c["passed"] for c in man["checks"])


def test_simulate_reproducible(tmp_path):
    cfg = {"experiment": "simulate", "N": 120,
           "params": {"t_max": 5.0, "dt": 0.01, "record_stride": 100, "radiation": 0.01, "store_snapshots": True}}
    run_experiment(cfg, tmp_path / "a", seed=11)
    run_experiment(cfg, tmp_path / "b", seed=11)
    for name in ("series.csv", "trajectory/snap_00003.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    traj = json.loads((tmp_path / "a" / "trajectory" / "manifest.json").read_text())
    assert len(traj["mass_series"]) == len(traj["times"]) == len(traj["energy_series"])
    run_experiment(cfg, tmp_path / "c", seed=12)
    assert (tmp_path / "a" / "series.csv").read_bytes() != (tmp_path / "c" / "series.csv").read_bytes()


def test_cli_validation_exit_code(tmp_path, capsys):
    cfgp = tmp_path / "bad.json"
    cfgp.write_text(json.dumps({"params": {"dt": -0.1}}))
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfgp), "--out", str(out)]) == 2
    assert not out.exists()
    assert "params/dt" in capsys.readouterr().err


def test_cli_bad_json_and_mismatch(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{ not json")
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    p.write_text(json.dumps({"experiment": "gamma"}))
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert main(["spectrum", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2


def test_cli_success_and_numerical_failure(tmp_path, capsys):
    assert main(["spectrum", "--out", str(tmp_path / "ok")]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["result"]["N0"] == 4
    p = tmp_path / "one_well.json"
    p.write_text(json.dumps({"potential": {"kind": "single_site", "v0": 2.0}}))
    # Gamma needs two eigenvalues
    assert main(["gamma", "--config", str(p), "--out", str(tmp_path / "fail")]) == 1
