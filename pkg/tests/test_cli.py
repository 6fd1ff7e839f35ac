import csv
import json
import subprocess
import sys

import pytest

from mecshare.cli import run

BASE = {"params": {"p": 0.5, "s": 0.1, "s_cd": 0.4, "B": 2.0, "I": 1000}}


def _config(tmp_path, name="cfg.json", **extra):
    cfg = json.loads(json.dumps(BASE))
    for k, v in extra.items():
        if k == "params":
            cfg["params"].update(v)
        else:
            cfg[k] = v
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# schema: mecshare/")
    return list(csv.DictReader(lines[1:]))


def test_equilibrium_row(tmp_path):
    cfg = _config(tmp_path, eta=0.4)
    assert run(["equilibrium", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    (row,) = _rows(tmp_path / "o" / "equilibrium.csv")
    assert float(row["psi_star"]) == pytest.approx(0.2)
    assert float(row["a"]) == pytest.approx(0.1)
    assert float(row["r"]) == pytest.approx(0.32)
    assert row["p"] == "0.5" and row["I"] == "1000"
    meta = json.loads((tmp_path / "o" / "meta.json").read_text())
    assert meta["rng"] == "numpy.random.PCG64" and meta["version"]


def test_equilibrium_at_eta_min(tmp_path):
    cfg = _config(tmp_path, eta=0.2)
    assert run(["equilibrium", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert float(_rows(tmp_path / "equilibrium.csv")[0]["psi_star"]) == 0.0


def test_infeasible_eta_exit_code(tmp_path, capsys):
    cfg = _config(tmp_path, eta=0.1)
    assert run(["equilibrium", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert "s/p" in capsys.readouterr().err


def test_grid_min_below_bound_is_infeasible(tmp_path):
    cfg = _config(tmp_path, eta_grid={"min": 0.1, "max": 1.0, "steps": 5})
    assert run(["equilibrium", "--config", cfg, "--out", str(tmp_path)]) == 3


@pytest.mark.parametrize("extra", [
    {"bogus": 1},
    {"params": {"s": 0.5}},
    {"eta": 0.4, "eta_grid": {"steps": 3}},
    {"eta": "a lot"},
    {"eta": 0.4, "sweep_variable": "s", "sweep_values": [0.1]},
    {"eta_grid": {"steps": 3, "stride": 2}},
])
def test_config_errors(tmp_path, extra):
    cfg = _config(tmp_path, **extra)
    assert run(["equilibrium", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["equilibrium", "--config", str(bad)]) == 2
    assert run(["equilibrium", "--config", str(tmp_path / "nope.json")]) == 2


def test_bad_epsilon(tmp_path):
    cfg = _config(tmp_path)
    assert run(["optimize", "--config", cfg, "--out", str(tmp_path),
                "--epsilon", "0.5"]) == 2


def test_optimize_with_curve(tmp_path):
    cfg = _config(tmp_path, eta_grid={"min": None, "max": 1.0, "steps": 801})
    assert run(["optimize", "--config", cfg, "--out", str(tmp_path)]) == 0
    (row,) = _rows(tmp_path / "optimize.csv")
    assert int(row["bound_k"]) == 17
    assert all(int(k) <= 17 for k in row["iterations"].split(";"))
    curve = _rows(tmp_path / "optimize_curve.csv")
    profits = [float(r["profit"]) for r in curve]
    peak = profits.index(max(profits))
    assert 0 < peak < len(profits) - 1          # rises, then falls
    labels = [r["branch"] for r in curve]
    flips = [i for i in range(1, len(labels)) if labels[i] != labels[i - 1]]
    assert len(flips) == 1
    assert float(curve[flips[0]]["eta"]) == pytest.approx(0.4718, abs=2e-3)


def test_optimize_json_single_file(tmp_path):
    cfg = _config(tmp_path, eta_grid={"steps": 11})
    assert run(["optimize", "--config", cfg, "--out", str(tmp_path), "--format", "json"]) == 0
    doc = json.loads((tmp_path / "optimize.json").read_text())
    assert doc["rows"][0]["bound_k"] == 17
    assert len(doc["curve"]["rows"]) == 11
    assert not (tmp_path / "optimize_curve.json").exists()


def test_social_optimum(tmp_path):
    cfg = _config(tmp_path, eta_grid={"steps": 9})
    assert run(["social-optimum", "--config", cfg, "--out", str(tmp_path)]) == 0
    for row in _rows(tmp_path / "social-optimum.csv"):
        assert float(row["welfare_so"]) >= float(row["welfare_ne"]) - 1e-9
        assert float(row["efficiency_loss"]) >= -1e-9


def test_simulate(tmp_path):
    cfg = _config(tmp_path, eta=0.4, sim={"n_runs": 20, "base_seed": 3})
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = {r["quantity"]: r for r in _rows(tmp_path / "simulate.csv")}
    assert float(rows["frac_agents"]["analytic"]) == pytest.approx(0.1)
    assert rows["epochs"]["analytic"] == ""


def test_simulate_seed_flag_and_eta_min(tmp_path):
    cfg = _config(tmp_path, eta=0.2, sim={"n_runs": 1})
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path), "--seed", "9"]) == 0
    rows = {r["quantity"]: r for r in _rows(tmp_path / "simulate.csv")}
    assert float(rows["frac_agents"]["mean"]) == 0.0
    assert rows["frac_agents"]["base_seed"] == "9"


def test_simulate_convergence_failure(tmp_path):
    cfg = _config(tmp_path, eta=0.8, sim={"n_runs": 3, "max_epochs": 1})
    assert run(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 4


def test_sweep_ordering(tmp_path):
    cfg = _config(tmp_path, sweep_variable="s", sweep_values=[0.2, 0.05, 0.1],
                  eta_grid={"max": 1.0, "steps": 5})
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "sweep.csv")
    keys = [(float(r["sweep_value"]), float(r["eta"])) for r in rows]
    assert keys == sorted(keys) and len(keys) == 15
    assert all(r["s"] == r["sweep_value"] for r in rows)


def test_sweep_over_eta(tmp_path):
    cfg = _config(tmp_path, sweep_variable="eta", sweep_values=[0.9, 0.3])
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert [r["eta"] for r in _rows(tmp_path / "sweep.csv")] == ["0.3", "0.9"]


def test_sweep_invalid_value(tmp_path):
    cfg = _config(tmp_path, sweep_variable="s", sweep_values=[0.05, 0.45],
                  eta_grid={"steps": 3})
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_compare_nonmec(tmp_path, caplog):
    cfg = _config(tmp_path, sweep_variable="s", sweep_values=[0.05, 0.1, 0.2])
    assert run(["compare-nonmec", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "compare-nonmec.csv")
    ratios = [float(r["profit_increase_ratio"]) for r in rows]
    assert ratios == sorted(ratios, reverse=True)


def test_compare_nonmec_zero_baseline(tmp_path):
    cfg = _config(tmp_path, params={"s_cd": 0.5}, sweep_variable="s",
                  sweep_values=[0.1])
    assert run(["compare-nonmec", "--config", cfg, "--out", str(tmp_path)]) == 0
    (row,) = _rows(tmp_path / "compare-nonmec.csv")
    assert row["profit_increase_ratio"] == "undefined"
    assert run(["compare-nonmec", "--config", cfg, "--out", str(tmp_path),
                "--format", "json"]) == 0
    doc = json.loads((tmp_path / "compare-nonmec.json").read_text())
    assert doc["rows"][0]["profit_increase_ratio"] is None


def test_workers_do_not_change_output(tmp_path):
    cfg = _config(tmp_path, sweep_variable="B", sweep_values=[1.0, 2.0],
                  eta_grid={"steps": 4})
    run(["sweep", "--config", cfg, "--out", str(tmp_path / "a")])
    run(["sweep", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "2"])
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_module_entry_point(tmp_path):
    cfg = _config(tmp_path, eta=0.4)
    out = subprocess.run([sys.executable, "-m", "mecshare", "equilibrium", "--config",
                          cfg, "--out", str(tmp_path / "m")], capture_output=True)
    assert out.returncode == 0
    assert (tmp_path / "m" / "equilibrium.csv").exists()
