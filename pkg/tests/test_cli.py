import csv
import json

import numpy as np
import pytest

from haarvol import __version__
from haarvol.cli import EXIT_CONFIG, EXIT_OK, EXIT_RESOURCE, EXIT_VALIDATION, main


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


SIM = {"J": 5, "driver": {"kind": "fbm", "hurst": 0.8}, "phi": "constant_one", "replicas": 2,
       "routes": ["fast", "wavelet_partial", "oracle"]}


def test_simulate_constant_one_routes_agree(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(write_config(tmp_path, SIM)), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "path.csv")
    assert list(rows[0]) == ["replica", "route", "t", "value"]
    for r in ("0", "1"):
        by_route = {
            route: np.array([float(x["value"]) for x in rows if x["replica"] == r and x["route"] == route])
            for route in SIM["routes"]
        }
        assert by_route["fast"].size == 33 and by_route["oracle"].size == 33
        assert np.abs(by_route["fast"] - by_route["oracle"]).max() <= 1e-12
        assert np.abs(by_route["wavelet_partial"] - by_route["oracle"]).max() <= 1e-12


def test_simulate_meta_sidecar(tmp_path):
    out = tmp_path / "out"
    main(["simulate", "--config", str(write_config(tmp_path, SIM)), "--out", str(out), "--seed", "17"])
    meta = json.loads((out / "path.meta.json").read_text())
    assert meta["schema_version"] == "1.0"
    assert meta["seed"] == 17
    assert meta["library_version"] == __version__
    assert len(meta["config_hash"]) == 16
    assert meta["columns"] == ["replica", "route", "t", "value"]


def test_simulate_seed_override_and_determinism(tmp_path):
    cfg = write_config(tmp_path, {**SIM, "phi": "sine_paper"})
    outs = []
    for name, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        main(["simulate", "--config", str(cfg), "--out", str(tmp_path / name), "--seed", seed])
        outs.append((tmp_path / name / "path.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_simulate_json_format(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, {**SIM, "routes": ["fast"], "replicas": 1})
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--format", "json"]) == EXIT_OK
    payload = json.loads((out / "path.json").read_text())
    assert payload["schema_version"] == "1.0"
    assert payload["columns"] == ["replica", "route", "t", "value"]
    assert len(payload["rows"]) == 33


def test_missing_phi_names_field(tmp_path, capsys):
    cfg = {k: v for k, v in SIM.items() if k != "phi"}
    code = main(["simulate", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "'phi'" in capsys.readouterr().err


@pytest.mark.parametrize(
    "cfg",
    [
        {**SIM, "driver": {"kind": "fbm", "hurst": 1.5}},
        {**SIM, "driver": {"kind": "ou"}},
        {**SIM, "phi": "cosine"},
        {**SIM, "routes": ["exact"]},
    ],
)
def test_invalid_configs(tmp_path, cfg):
    assert main(["simulate", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG
    assert main(["simulate"]) == EXIT_CONFIG


def test_unknown_command():
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == EXIT_CONFIG


def test_resource_limit(tmp_path):
    cfg = write_config(tmp_path, {**SIM, "J": 14})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_RESOURCE


def test_convergence_rates(tmp_path):
    cfg = {"driver": {"kind": "fbm", "hurst": 0.8}, "phi": "sine_paper", "replicas": 5,
           "J_range": [3, 5], "gamma_list": [0.3, 0.45]}
    out = tmp_path / "out"
    assert main(["convergence", "--config", str(write_config(tmp_path, cfg)), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "rates.csv")
    assert list(rows[0]) == ["gamma", "J", "mean_error", "fitted_slope", "predicted_slope", "r2"]
    assert len(rows) == 6
    pred = {float(r["gamma"]): float(r["predicted_slope"]) for r in rows}
    assert pred[0.3] == pytest.approx(-0.2, abs=1e-12)
    assert pred[0.45] == pytest.approx(-0.05, abs=1e-12)
    assert len({r["fitted_slope"] for r in rows if r["gamma"] == "0.3"}) == 1


@pytest.mark.parametrize("J_range", [[], [4]])
def test_convergence_bad_range(tmp_path, J_range):
    cfg = {"driver": {"kind": "fbm", "hurst": 0.8}, "phi": "sine_paper", "J_range": J_range,
           "gamma_list": [0.3]}
    assert main(["convergence", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_convergence_too_few_replicas(tmp_path):
    cfg = {"driver": {"kind": "fbm", "hurst": 0.8}, "phi": "sine_paper", "J_range": [3, 4],
           "gamma_list": [0.3], "replicas": 2}
    assert main(["convergence", "--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_estimate_from_simulation_and_file(tmp_path):
    cfg = {"J": 6, "driver": {"kind": "fbm", "hurst": 0.8}, "phi": "sine_paper", "replicas": 3,
           "routes": ["oracle"], "oracle_full_grid": True, "t0": [0.5], "h_levels": [3, 10]}
    path = write_config(tmp_path, cfg)
    assert main(["estimate", "--config", str(path), "--out", str(tmp_path / "direct")]) == EXIT_OK
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "sim")]) == EXIT_OK
    code = main(["estimate", "--config", str(path), "--input", str(tmp_path / "sim" / "path.csv"),
                 "--out", str(tmp_path / "file")])
    assert code == EXIT_OK
    direct = read_csv(tmp_path / "direct" / "estimates.csv")
    from_file = read_csv(tmp_path / "file" / "estimates.csv")
    assert len(direct) == 3
    for a, b in zip(direct, from_file):
        assert float(a["exponent"]) == pytest.approx(float(b["exponent"]), abs=1e-12)
    norms = read_csv(tmp_path / "direct" / "norms.csv")
    assert list(norms[0]) == ["replica", "gamma", "holder_norm"]


def test_reproduce_figures(tmp_path):
    for name in ("a", "b"):
        assert main(["reproduce-figures", "--out", str(tmp_path / name)]) == EXIT_OK
    files = ["figure1_driver.csv", "figure2_affine.csv", "figure2_sine.csv"]
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        assert (tmp_path / "a" / f.replace(".csv", ".meta.json")).exists()
    driver = read_csv(tmp_path / "a" / files[0])
    t = np.array([float(r["t"]) for r in driver])
    H = np.array([float(r["H"]) for r in driver])
    np.testing.assert_allclose(H, 0.6 + 0.2 * t, atol=1e-15)
    X = [r["X"] for r in driver]
    for f in files[1:]:
        assert [r["X"] for r in read_csv(tmp_path / "a" / f)] == X


def test_validate_corrupted_constants(tmp_path):
    bad = tmp_path / "constants.json"
    bad.write_text('{"schema_version": "1.0", "criteria": {"identity": ')
    assert main(["validate", "--constants", str(bad)]) == EXIT_CONFIG
    bad.write_text('{"schema_version": "0.9", "criteria": {}}')
    assert main(["validate", "--constants", str(bad)]) == EXIT_CONFIG


def test_validate_quick_reports_mode(capsys):
    code = main(["validate", "--quick"])
    out = capsys.readouterr().out
    assert "quick mode" in out
    assert out.count("[PASS]") + out.count("[FAIL]") == 10
    assert code == (EXIT_OK if out.count("[FAIL]") == 0 else EXIT_VALIDATION)
