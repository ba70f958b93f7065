"""Command-line entry point: ``bpa {simulate,estimate,theory,ode,market,table}``.

Exit codes: 0 ok, 2 config error, 3 runtime error. Errors go to stderr as a
JSON object. Outputs are written atomically into ``--out`` (default ``.``);
every JSON output echoes the resolved config and the toolkit version.
"""

from __future__ import annotations

import argparse
import copy
import csv
import enum
import io
import json
import math
import os
import sys
import tempfile
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from . import tables as T
from .core import BPA, BPNA, CsvSink, ModelParams, StopRule, run
from .distributions import (
    AttackSpec,
    Binomial,
    BinomialOfFriends,
    Constant,
    ExplicitPMF,
    Poisson,
    PoissonThinned,
    Zero,
    validate_assumptions,
)
from .montecarlo import EstimatorConfig, estimate_extinction, simulate_replications
from .sa_ode import OdeConfig, Theta, attraction_time, classify, integrate, ode_csv, rhs_for
from .theory import limit_fraction, theory_report
from .viralmarket import MarketParams, compare, to_bpa, to_bpna

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
DEFAULT_REPLICATIONS = 1000
DEFAULT_STOP = {"max_transitions": 10**7, "time_horizon": None, "survival_cap": 10**4,
                "stop_on_extinction": True}
DEFAULT_ODE = {"step_size": 0.01, "t_end": 10.0, "scheme": "RK4", "clamp_theta": True,
               "saturated": False, "tol": 0.05}
ZERO_ATTACK = {"max_attack": {"kind": "zero"}, "resist_prob": 0.0}


class ConfigError(Exception):
    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path or []


def load_schema() -> dict:
    return json.loads(resources.files("bpa").joinpath("config_schema.json").read_text())


# ---------------------------------------------------------------------------
# config -> objects


def law_from_json(d):
    k = d["kind"]
    if k == "zero":
        return Zero()
    if k == "constant":
        return Constant(d["value"])
    if k == "poisson":
        return Poisson(d["mean"])
    if k == "binomial":
        return Binomial(d["n"], d["p"])
    if k == "pmf":
        return ExplicitPMF(tuple(d["probs"]))
    if k == "binomial_of_friends":
        return BinomialOfFriends(law_from_json(d["friends"]), d["p"])
    if k == "poisson_thinned":
        return PoissonThinned(d["friend_mean"], d["p"])
    raise ConfigError(f"unknown law kind {k!r}")


def attack_from_json(d) -> AttackSpec:
    return AttackSpec(law_from_json(d["max_attack"]), d["resist_prob"])


def model_from_json(d) -> ModelParams:
    return ModelParams(
        lam=d["lam"],
        offspring_x=law_from_json(d["offspring_x"]),
        offspring_y=law_from_json(d["offspring_y"]),
        attack_xy=attack_from_json(d["attack_xy"]),
        attack_yx=attack_from_json(d["attack_yx"]),
        x0=d["x0"],
        y0=d["y0"],
        mode=d["mode"],
        joint_friend_split=d["joint_friend_split"],
    )


def market_from_json(d) -> MarketParams:
    return MarketParams(
        friend_law=law_from_json(d["friend_law"]),
        eta_x=d["eta_x"], eta_y=d["eta_y"], gamma=d["gamma"],
        p_xy=d["p_xy"], p_yx=d["p_yx"],
        seeds_x=d["seeds_x"], seeds_y=d["seeds_y"],
        lam=d["lam"], joint_friend_split=d["joint_friend_split"],
    )


def stop_from_json(d) -> StopRule:
    return StopRule(d["max_transitions"], d["time_horizon"], d["survival_cap"], d["stop_on_extinction"])


def resolve(raw: dict, args) -> dict:
    """Fill defaults and apply command-line overrides; the result is echoed in outputs."""
    cfg = copy.deepcopy(raw)
    if "model" in cfg:
        m = cfg["model"]
        m.setdefault("attack_xy", dict(ZERO_ATTACK))
        m.setdefault("attack_yx", dict(ZERO_ATTACK))
        m.setdefault("x0", 1)
        m.setdefault("y0", 1)
        m.setdefault("mode", BPA)
        m.setdefault("joint_friend_split", False)
        if args.mode == "bpna":
            m["mode"] = BPNA
            m["attack_xy"] = dict(ZERO_ATTACK)
            m["attack_yx"] = dict(ZERO_ATTACK)
            m["joint_friend_split"] = False
    if "market" in cfg:
        cfg["market"].setdefault("lam", 1.0)
        cfg["market"].setdefault("joint_friend_split", False)
    est = cfg.setdefault("estimator", {})
    est.setdefault("replications", DEFAULT_REPLICATIONS)
    est.setdefault("seed", 0)
    est.setdefault("parallelism", _threads())
    if args.replications is not None:
        est["replications"] = args.replications
    if args.seed is not None:
        est["seed"] = args.seed
    stop = cfg.setdefault("stop", dict(DEFAULT_STOP))
    for k, v in DEFAULT_STOP.items():
        stop.setdefault(k, None if k != "stop_on_extinction" else v)
    ode = cfg.setdefault("ode", {})
    for k, v in DEFAULT_ODE.items():
        ode.setdefault(k, v)
    cfg.setdefault("simulate", {}).setdefault("stride", 1)
    cfg["mode"] = args.mode
    return cfg


def _threads() -> int:
    v = os.environ.get("BPA_THREADS")
    if not v:
        return 1
    try:
        return max(int(v), 1)
    except ValueError as e:
        raise ConfigError(f"BPA_THREADS must be an integer, got {v!r}") from e


def model_for(cfg: dict) -> ModelParams:
    """The process to simulate: the model section, else the market's BPA (or BPNA) image."""
    if "model" in cfg:
        return model_from_json(cfg["model"])
    if "market" in cfg:
        market = market_from_json(cfg["market"])
        return to_bpna(market) if cfg["mode"] == "bpna" else to_bpa(market)
    raise ConfigError("config needs a 'model' or 'market' section", ["model"])


def estimator_for(cfg: dict) -> EstimatorConfig:
    e = cfg["estimator"]
    return EstimatorConfig(e["replications"], e["seed"], stop_from_json(cfg["stop"]), e["parallelism"])


# ---------------------------------------------------------------------------
# output


def clean(obj):
    """JSON-ready copy: 12 significant digits, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(format(v, ".12g"))
    return obj


def dump_json(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def write_atomic(directory: str, name: str, text: str):
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, os.path.join(directory, name))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def envelope(command: str, cfg: dict, result) -> dict:
    return {"toolkit": "bpa", "version": __version__, "command": command, "config": cfg, "result": result}


def fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else format(v, ".12g")
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg, out):
    params = model_for(cfg)
    stop = stop_from_json(cfg["stop"])
    buf = io.StringIO()
    sink = CsvSink(buf, stride=cfg["simulate"]["stride"], events=True)
    res = run(params, stop, np.random.default_rng(cfg["estimator"]["seed"]), sink)
    st = res.final_state
    outcome = {
        "halt_reason": res.halt_reason,
        "x_extinct": res.x_extinct,
        "y_extinct": res.y_extinct,
        "total_extinct": res.total_extinct,
        "extinct_epoch_x": res.extinct_epoch_x,
        "extinct_epoch_y": res.extinct_epoch_y,
        "final_state": {"n": st.n, "x": st.x, "y": st.y, "tau": st.tau},
        "terminal_fraction": res.terminal_fraction,
    }
    write_atomic(out, "trajectory.csv", buf.getvalue())
    write_atomic(out, "outcome.json", dump_json(envelope("simulate", cfg, outcome)))


def cmd_estimate(cfg, out):
    from ._kernel import HALT_NAMES

    params = model_for(cfg)
    config = estimator_for(cfg)
    batch = simulate_replications(params, config)
    est = estimate_extinction(params, config, batch)
    rows = []
    for i in range(len(batch)):
        x, y = int(batch.x[i]), int(batch.y[i])
        rows.append([int(batch.index[i]), HALT_NAMES[int(batch.halt[i])],
                     int(batch.x_extinct[i]), int(batch.y_extinct[i]), int(batch.n[i]), x, y,
                     float(batch.tau[i]), x / (x + y) if x + y else math.nan])
    header = ["replication", "haltReason", "xExtinct", "yExtinct", "n", "x", "y", "tau", "fraction"]
    write_atomic(out, "replications.csv", csv_text(header, rows))
    write_atomic(out, "estimates.json", dump_json(envelope("estimate", cfg, est.to_dict())))


def cmd_theory(cfg, out):
    params = model_for(cfg)
    result = theory_report(params).to_dict()
    result["limit_fraction"] = limit_fraction(params)
    result["assumptions"] = validate_assumptions(params).to_dict()
    write_atomic(out, "theory.json", dump_json(envelope("theory", cfg, result)))


def cmd_ode(cfg, out):
    params = model_for(cfg)
    o = cfg["ode"]
    start = o.setdefault("start", {"psi": float(params.x0 + params.y0), "theta": float(params.x0)})
    start.setdefault("t", 0.0)
    conf = OdeConfig(o["step_size"], o["t_end"], o["scheme"], o["clamp_theta"])
    path = integrate(rhs_for(params, o["saturated"]), Theta(start["psi"], start["theta"], start["t"]), conf)
    final = path.final
    buf = io.StringIO()
    ode_csv(path, buf)
    result = {
        "class": classify(final, params, o["tol"]),
        "final": {"psi": final.psi, "theta": final.theta, "t": final.t},
        "attraction_time": attraction_time(params),
    }
    write_atomic(out, "ode.csv", buf.getvalue())
    write_atomic(out, "classification.json", dump_json(envelope("ode", cfg, result)))


def cmd_market(cfg, out):
    if "market" in cfg:
        subject = market_from_json(cfg["market"])
    else:
        subject = model_for(cfg)
    report = compare(subject, estimator_for(cfg))
    write_atomic(out, "comparison.json", dump_json(envelope("market", cfg, report.to_dict())))


def cmd_table(cfg, out, table_id, full, replications=None):
    if table_id is None:
        table_id = cfg.get("table", {}).get("id")
    if table_id not in T.TABLES:
        raise ConfigError("table id must be one of 1..6", ["table", "id"])
    cfg.setdefault("table", {})["id"] = table_id
    cfg["table"]["full"] = full
    cfg["table"]["replications"] = replications  # None means the per-table default
    cfg["estimator"].pop("replications", None)
    table = T.TABLES[table_id](full=full, seed=cfg["estimator"]["seed"], replications=replications)
    rows = [[r[c] for c in table.columns] for r in table.rows]
    write_atomic(out, f"table{table_id}.csv", csv_text(table.columns, rows))
    write_atomic(out, f"table{table_id}.json", dump_json(envelope("table", cfg, {"columns": table.columns,
                                                                               "rows": table.rows})))


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bpa", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"bpa {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "estimate", "theory", "ode", "market", "table"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--seed", type=int, help="master seed (overrides estimator.seed)")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--replications", type=int, help="replication count override")
        s.add_argument("--mode", choices=["bpa", "bpna"], default="bpa")
        s.add_argument("--full", action="store_true", help="published-scale replication counts (table only)")
        if name == "table":
            s.add_argument("table_id", nargs="?", type=int, help="table number 1..6")
    return p


def _emit_error(kind: str, message: str, path=None):
    sys.stderr.write(json.dumps({"error": {"kind": kind, "message": message, "path": list(path or [])}},
                                sort_keys=True) + "\n")


def _read_config(args) -> dict:
    if args.config is None:
        if args.command == "table":
            return {}
        raise ConfigError("--config is required for this subcommand")
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as e:
        raise ConfigError(e.message, list(e.absolute_path)) from e
    return raw


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        _emit_error("config", "--seed must be an unsigned 64-bit integer")
        return EXIT_CONFIG
    if args.replications is not None and args.replications < 1:
        _emit_error("config", "--replications must be positive")
        return EXIT_CONFIG
    try:
        cfg = resolve(_read_config(args), args)
        if args.command not in ("table", "market"):
            model_for(cfg)  # surface parameter errors before any work
    except ConfigError as e:
        _emit_error("config", str(e), e.path)
        return EXIT_CONFIG
    except ValueError as e:
        _emit_error("config", str(e))
        return EXIT_CONFIG

    if cfg["estimator"]["parallelism"] > 1:
        import numba

        numba.set_num_threads(min(cfg["estimator"]["parallelism"], numba.config.NUMBA_NUM_THREADS))
    try:
        if args.command == "table":
            cmd_table(cfg, args.out, args.table_id, args.full, args.replications)
        else:
            {"simulate": cmd_simulate, "estimate": cmd_estimate, "theory": cmd_theory,
             "ode": cmd_ode, "market": cmd_market}[args.command](cfg, args.out)
    except ConfigError as e:
        _emit_error("config", str(e), e.path)
        return EXIT_CONFIG
    except ValueError as e:
        _emit_error("config", str(e))
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - every other failure is a runtime error
        _emit_error("runtime", f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
