import csv
import json
import math
import subprocess
import sys

import pytest

from bpa.cli import main

HALTS = {"extinction", "horizon", "transitions", "survivalCap", "watch"}

TABLE1_MODEL = {
    "lam": 0.0002,
    "offspring_x": {"kind": "binomial_of_friends", "friends": {"kind": "poisson", "mean": 4}, "p": 0.2667},
    "offspring_y": {"kind": "binomial_of_friends", "friends": {"kind": "poisson", "mean": 4}, "p": 0.2667},
    "attack_xy": {"max_attack": {"kind": "binomial_of_friends", "friends": {"kind": "poisson", "mean": 4},
                                 "p": 0.053}, "resist_prob": 0.3},
    "attack_yx": {"max_attack": {"kind": "binomial_of_friends", "friends": {"kind": "poisson", "mean": 4},
                                 "p": 0.053}, "resist_prob": 0.3},
    "x0": 2,
    "y0": 2,
}


def coexist_model(mx, my, mc, x0=10, y0=10):
    return {
        "lam": 1.0,
        "offspring_x": {"kind": "poisson", "mean": mx},
        "offspring_y": {"kind": "poisson", "mean": my},
        "attack_xy": {"max_attack": {"kind": "poisson", "mean": mc}, "resist_prob": 1.0},
        "attack_yx": {"max_attack": {"kind": "poisson", "mean": mc}, "resist_prob": 1.0},
        "x0": x0,
        "y0": y0,
    }


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def invoke(tmp_path, command, cfg, *extra, out="out"):
    target = tmp_path / out
    target.mkdir(exist_ok=True)
    argv = [command, "--out", str(target)]
    if cfg is not None:
        argv += ["--config", write_cfg(tmp_path, cfg)]
    return main(argv + list(extra)), target


def read_json(path):
    return json.loads(path.read_text())


def test_simulate_outputs(tmp_path):
    cfg = {"model": TABLE1_MODEL, "stop": {"survival_cap": 200, "time_horizon": 1e7}}
    code, out = invoke(tmp_path, "simulate", cfg, "--seed", "3")
    assert code == 0
    outcome = read_json(out / "outcome.json")
    assert outcome["command"] == "simulate" and "version" in outcome
    assert outcome["result"]["halt_reason"] in HALTS
    rows = list(csv.DictReader((out / "trajectory.csv").open()))
    assert list(rows[0]) == ["n", "x", "y", "tau", "waker", "offspring", "attack"]
    assert rows[0]["n"] == "0" and (rows[0]["x"], rows[0]["y"]) == ("2", "2")


def test_bpna_mode_has_no_attacks(tmp_path):
    cfg = {"model": TABLE1_MODEL, "stop": {"survival_cap": 300, "time_horizon": 1e7}}
    for seed in range(5):
        code, out = invoke(tmp_path, "simulate", cfg, "--mode", "bpna", "--seed", str(seed))
        assert code == 0
        rows = list(csv.DictReader((out / "trajectory.csv").open()))
        assert all(r["attack"] in ("0", "") for r in rows)
        assert read_json(out / "outcome.json")["config"]["model"]["mode"] == "BPNA"


def test_same_seed_same_bytes(tmp_path):
    cfg = {"model": TABLE1_MODEL, "estimator": {"replications": 50}, "stop": {"survival_cap": 500,
                                                                              "time_horizon": 1e7}}
    blobs = []
    for name in ("a", "b"):
        code, out = invoke(tmp_path, "estimate", cfg, "--seed", "42", out=name)
        assert code == 0
        blobs.append(((out / "estimates.json").read_bytes(), (out / "replications.csv").read_bytes()))
    assert blobs[0] == blobs[1]
    header = blobs[0][1].decode().splitlines()[0]
    assert header == "replication,haltReason,xExtinct,yExtinct,n,x,y,tau,fraction"


def test_estimate_counts_add_up(tmp_path):
    cfg = {"model": TABLE1_MODEL, "stop": {"survival_cap": 500, "time_horizon": 1e7}}
    code, out = invoke(tmp_path, "estimate", cfg, "--replications", "40")
    assert code == 0
    rows = list(csv.DictReader((out / "replications.csv").open()))
    assert len(rows) == 40
    assert {r["haltReason"] for r in rows} <= HALTS


def test_bad_config_exit_two(tmp_path, capsys):
    bad = {"model": {**TABLE1_MODEL, "lam": -1}}
    code, _ = invoke(tmp_path, "simulate", bad)
    assert code == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"]["kind"] == "config"
    assert err["error"]["path"][0] == "model"


def test_unknown_key_rejected(tmp_path, capsys):
    code, _ = invoke(tmp_path, "theory", {"model": TABLE1_MODEL, "colour": 1})
    assert code == 2
    assert "error" in json.loads(capsys.readouterr().err.strip())


def test_missing_config_and_bad_seed(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path)]) == 2
    assert main(["theory", "--seed", "-1", "--config", write_cfg(tmp_path, {"model": TABLE1_MODEL})]) == 2
    capsys.readouterr()


@pytest.mark.parametrize(
    "model, key, want",
    [
        (TABLE1_MODEL, "beta_l", 0.5),
        (coexist_model(3.0, 2.98, 0.02), "beta_a_l", 0.381966),
        (coexist_model(300, 280, 10), "beta_a_l", 0.292893),
    ],
)
def test_theory_ratios(tmp_path, model, key, want):
    code, out = invoke(tmp_path, "theory", {"model": model})
    assert code == 0
    res = read_json(out / "theory.json")["result"]
    assert round(res[key], 6) == want
    assert "assumptions" in res and "limit_set" in res


def test_ode_closed_form_and_classes(tmp_path):
    model = coexist_model(2.0, 2.0, 0.02)
    cfg = {"model": model, "ode": {"t_end": 10.0, "start": {"psi": 0.5, "theta": 0.1}}}
    code, out = invoke(tmp_path, "ode", cfg)
    assert code == 0
    rows = list(csv.DictReader((out / "ode.csv").open()))
    for r in rows:
        t = float(r["t"])
        assert abs(float(r["psi"]) - (math.exp(-t) * (0.5 - 1.0) + 1.0)) <= 1e-8

    cfg = {"model": model, "ode": {"t_end": 40.0, "start": {"psi": 1.0, "theta": 0.9, "t": 5.0}}}
    code, out = invoke(tmp_path, "ode", cfg, out="x")
    assert read_json(out / "classification.json")["result"]["class"] == "XOnly"

    cfg = {"model": model, "ode": {"start": {"psi": 0.0, "theta": 0.0}}}
    code, out = invoke(tmp_path, "ode", cfg, out="z")
    assert read_json(out / "classification.json")["result"]["class"] == "BothExtinct"


def test_market_comparison(tmp_path):
    market = {"friend_law": {"kind": "poisson", "mean": 4}, "eta_x": 0.3, "eta_y": 0.3, "gamma": 0.05,
              "p_xy": 0.3, "p_yx": 0.3, "seeds_x": 5, "seeds_y": 5}
    cfg = {"market": market, "stop": {"survival_cap": 300, "time_horizon": 1e9}}
    code, out = invoke(tmp_path, "market", cfg, "--replications", "50")
    assert code == 0
    res = read_json(out / "comparison.json")["result"]
    assert set(res) == {"bpa", "bpna", "theory_bpa", "theory_bpna"}


def test_table_reduced(tmp_path):
    code, out = invoke(tmp_path, "table", None, "6", "--replications", "10")
    assert code == 0
    doc = read_json(out / "table6.json")
    assert doc["result"]["columns"] == ["m_x", "m_y", "m_c", "x0", "y0", "beta", "pct_in"]
    assert len((out / "table6.csv").read_text().splitlines()) == 1 + len(doc["result"]["rows"])
    assert main(["table", "9", "--out", str(out)]) == 2


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path, {"model": TABLE1_MODEL})
    proc = subprocess.run([sys.executable, "-m", "bpa", "theory", "--config", cfg, "--out", str(tmp_path)],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "theory.json").exists()
