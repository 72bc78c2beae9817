"""Command-line front end.

Subcommands: ``classical`` (baseline posterior only), ``run`` (full
experiment, JSON report + optional CSV row), ``sweep`` (one run per axis
value plus a fitted log-log slope where applicable), ``gen`` (synthetic
dataset to CSV).

Config files are INI-style key=value sections ([data], [kernel],
[noise], [quantum], [run]); command-line flags override file values.
Relative output paths land in $CVQGPR_OUTPUT_DIR when it is set.

Exit codes: 0 success, 2 input error, 3 conditioning error, 4 internal
numerical error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime
import json
import os
import sys

import numpy as np

from .data import generate_synthetic, load_dataset, save_dataset
from .errors import ConditioningError, CvqgprError, InputError
from .gpr import (KernelSpec, NoiseModel, build_covariance_system,
                  classical_posterior)
from .pipeline import RunConfig, run_mean_estimation, run_variance_estimation

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONDITIONING = 3
EXIT_NUMERICAL = 4

OUTPUT_DIR_ENV = "CVQGPR_OUTPUT_DIR"

SWEEP_AXES = ("M", "xi", "gamma", "epsilon", "shots")

_CONFIG_KEYS = {
    ("data", "path"): ("data", str),
    ("data", "synthetic_n"): ("synthetic_n", int),
    ("data", "synthetic_d"): ("synthetic_d", int),
    ("data", "synthetic_seed"): ("synthetic_seed", int),
    ("kernel", "family"): ("kernel", str),
    ("kernel", "length_scale"): ("length_scale", float),
    ("kernel", "amplitude"): ("amplitude", float),
    ("noise", "sigma2"): ("noise", float),
    ("quantum", "xi"): ("xi", float),
    ("quantum", "epsilon"): ("epsilon", float),
    ("quantum", "gamma"): ("gamma", float),
    ("quantum", "steps"): ("steps", int),
    ("quantum", "zeta"): ("zeta", float),
    ("quantum", "path"): ("path", str),
    ("quantum", "mode"): ("mode", str),
    ("quantum", "shots"): ("shots", int),
    ("quantum", "sign"): ("sign", float),
    ("quantum", "window"): ("window", float),
    ("quantum", "jump_depth"): ("jump_depth", int),
    ("run", "seed"): ("seed", int),
    ("run", "x_star"): ("x_star", str),
    ("run", "output"): ("output", str),
    ("run", "csv"): ("csv", str),
    ("run", "variance"): ("variance", _bool := lambda s: s.lower() in ("1", "true", "yes")),
}


def _add_data_args(p):
    p.add_argument("--data", help="training-set CSV (header x1,...,xd,y)")
    p.add_argument("--synthetic-n", type=int, dest="synthetic_n",
                   help="generate a synthetic dataset with N points instead")
    p.add_argument("--synthetic-d", type=int, dest="synthetic_d")
    p.add_argument("--synthetic-seed", type=int, dest="synthetic_seed")


def _add_kernel_args(p):
    p.add_argument("--kernel", choices=("squared-exponential", "linear", "constant"))
    p.add_argument("--length-scale", type=float, dest="length_scale")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--noise", type=float, help="target-noise variance sigma^2")


def _add_quantum_args(p):
    p.add_argument("--xi", type=float)
    p.add_argument("--epsilon", type=float, help="error budget epsilon_target")
    p.add_argument("--gamma", type=float, help="explicit coupling (with --steps)")
    p.add_argument("--steps", type=int, help="explicit Trotter step count M")
    p.add_argument("--zeta", type=float)
    p.add_argument("--path", choices=("direct", "oracle"))
    p.add_argument("--mode", choices=("exact", "sampled"))
    p.add_argument("--shots", type=int)
    p.add_argument("--sign", type=float, choices=(1.0, -1.0))
    p.add_argument("--window", type=float, help="homodyne window half-width")
    p.add_argument("--jump-depth", type=int, dest="jump_depth")


DEFAULTS = {
    "kernel": "squared-exponential", "length_scale": 1.0, "amplitude": 1.0,
    "noise": 0.0, "xi": 0.1, "epsilon": 0.05, "gamma": None, "steps": None,
    "zeta": 0.25, "path": "direct", "mode": "exact", "shots": 10000,
    "sign": 1.0, "window": None, "jump_depth": 1, "seed": 0,
    "data": None, "synthetic_n": None, "synthetic_d": None,
    "synthetic_seed": None, "x_star": None, "output": None, "csv": None,
    "variance": True,
}


def _merged_options(args) -> dict:
    opts = dict(DEFAULTS)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        parser = configparser.ConfigParser()
        if not parser.read(cfg_path):
            raise InputError(f"cannot read config file {cfg_path}")
        for (section, key), (name, conv) in _CONFIG_KEYS.items():
            if parser.has_option(section, key):
                opts[name] = conv(parser.get(section, key))
    for name in DEFAULTS:
        val = getattr(args, name, None)
        if val is not None:
            opts[name] = val
    return opts


def _resolve_output(path):
    if path is None:
        return None
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _dataset(opts):
    if opts["data"]:
        return load_dataset(opts["data"])
    if opts["synthetic_n"]:
        if not opts["synthetic_d"]:
            raise InputError("--synthetic-d is required with --synthetic-n")
        seed = opts["synthetic_seed"] if opts["synthetic_seed"] is not None \
            else opts["seed"]
        return generate_synthetic(opts["synthetic_n"], opts["synthetic_d"],
                                  _kernel(opts), NoiseModel(opts["noise"]), seed)
    raise InputError("provide --data or --synthetic-n/--synthetic-d")


def _kernel(opts) -> KernelSpec:
    return KernelSpec(opts["kernel"], opts["length_scale"], opts["amplitude"])


def _x_star(opts, d: int) -> np.ndarray:
    if opts["x_star"] is None:
        raise InputError("--x-star is required")
    try:
        vec = np.array([float(v) for v in str(opts["x_star"]).split(",")])
    except ValueError as exc:
        raise InputError(f"cannot parse --x-star: {exc}") from exc
    if vec.shape[0] != d:
        raise InputError(f"--x-star has dimension {vec.shape[0]}, data has {d}")
    return vec


def _run_config(opts) -> RunConfig:
    return RunConfig(
        xi=opts["xi"], epsilon_target=opts["epsilon"], gamma=opts["gamma"],
        m_steps=opts["steps"], zeta=opts["zeta"], path=opts["path"],
        mode=opts["mode"], shots=opts["shots"], seed=opts["seed"],
        sign=opts["sign"], window_half_width=opts["window"],
        jump_depth=opts["jump_depth"])


def _flatten(d: dict, prefix="") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}.{k}" if prefix else k
        if isinstance(v, dict):
            out.update(_flatten(v, key))
        else:
            out[key] = v
    return out


def _write_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _append_csv_row(doc: dict, path) -> None:
    flat = _flatten(doc)
    exists = os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=sorted(flat))
        if not exists:
            writer.writeheader()
        writer.writerow(flat)


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_classical(args) -> int:
    opts = _merged_options(args)
    data = _dataset(opts)
    system = build_covariance_system(data, _kernel(opts), NoiseModel(opts["noise"]),
                                     _x_star(opts, data.d))
    post = classical_posterior(system, data.targets)
    doc = {"mean": post.mean, "variance": post.variance,
           "kappa": post.condition_number, "N": data.n, "d": data.d}
    out = _resolve_output(opts["output"])
    if out:
        _write_json(doc, out)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def _experiment_document(data, opts) -> dict:
    kernel = _kernel(opts)
    noise = NoiseModel(opts["noise"])
    x_star = _x_star(opts, data.d)
    config = _run_config(opts)
    report = run_mean_estimation(data, kernel, noise, x_star, config)
    doc = report.to_dict()
    if opts["variance"]:
        var_report = run_variance_estimation(data, kernel, noise, x_star, config)
        doc["quantum"]["variance"] = var_report.variance_estimate
    return doc


def _cmd_run(args) -> int:
    opts = _merged_options(args)
    data = _dataset(opts)
    doc = _experiment_document(data, opts)
    doc["timestamp"] = _timestamp()
    out = _resolve_output(opts["output"])
    if out:
        _write_json(doc, out)
    csv_path = _resolve_output(opts["csv"])
    if csv_path:
        _append_csv_row(doc, csv_path)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def _sweep_override(opts: dict, axis: str, value: float) -> dict:
    over = dict(opts)
    if axis == "M":
        if over["gamma"] is None:
            raise InputError("an M sweep needs an explicit --gamma")
        over["steps"] = int(value)
    elif axis == "xi":
        over["xi"] = float(value)
    elif axis == "gamma":
        if over["steps"] is None:
            raise InputError("a gamma sweep needs an explicit --steps")
        over["gamma"] = float(value)
    elif axis == "epsilon":
        over["epsilon"] = float(value)
        over["gamma"] = None
        over["steps"] = None
    elif axis == "shots":
        over["shots"] = int(value)
        over["mode"] = "sampled"
    return over


def _cmd_sweep(args) -> int:
    opts = _merged_options(args)
    axis = args.axis
    try:
        values = [float(v) for v in args.values.split(",")]
    except ValueError as exc:
        raise InputError(f"cannot parse --values: {exc}") from exc
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise InputError("sweep values must be nonempty and strictly increasing")
    data = _dataset(opts)
    rows, reports = [], []
    for value in values:
        row = {"axis_value": value, "relError": None, "traceDistance": None,
               "windowProb": None, "ancillaAcceptance": None, "error": ""}
        try:
            doc = _experiment_document(data, _sweep_override(opts, axis, value))
            reports.append(doc)
            row["relError"] = doc["quantum"]["relError"]
            row["traceDistance"] = doc["errors"]["trotterTraceDistance"]
            row["windowProb"] = doc["probabilities"]["window"]
            trials = doc["probabilities"]["ancillaTrials"]
            row["ancillaAcceptance"] = (doc["probabilities"]["ancillaSuccesses"] / trials
                                        if trials else None)
        except CvqgprError as exc:
            row["error"] = str(exc)
            reports.append({"axis_value": value, "error": str(exc)})
        rows.append(row)
    slope = _fit_slope(axis, values, rows, reports)
    summary = {"axis": axis, "values": values, "slope": slope,
               "rows": rows, "reports": reports, "timestamp": _timestamp()}
    out = _resolve_output(opts["output"])
    if out:
        _write_json(summary, out)
    csv_path = _resolve_output(opts["csv"])
    if csv_path:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["axis_value", "relError",
                                                    "traceDistance", "windowProb",
                                                    "ancillaAcceptance", "error"])
            writer.writeheader()
            writer.writerows(rows)
    print(json.dumps({"axis": axis, "slope": slope, "rows": rows},
                     indent=2, sort_keys=True))
    return EXIT_OK


def _fit_slope(axis, values, rows, reports):
    """Log-log slope of the axis-appropriate error measure, when defined."""
    if axis == "M":
        series = [r["traceDistance"] for r in rows]
    elif axis == "shots":
        series = [rep.get("quantum", {}).get("stderr") for rep in reports]
    else:
        return None
    pts = [(v, s) for v, s in zip(values, series) if s and s > 0]
    if len(pts) < 2:
        return None
    logs = np.log(np.asarray(pts))
    return float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])


def _cmd_gen(args) -> int:
    opts = _merged_options(args)
    if not opts["synthetic_n"] or not opts["synthetic_d"]:
        raise InputError("gen requires --synthetic-n and --synthetic-d")
    seed = opts["synthetic_seed"] if opts["synthetic_seed"] is not None else opts["seed"]
    data = generate_synthetic(opts["synthetic_n"], opts["synthetic_d"],
                              _kernel(opts), NoiseModel(opts["noise"]), seed)
    out = _resolve_output(opts["output"])
    if not out:
        raise InputError("gen requires --output")
    save_dataset(data, out)
    print(f"wrote {data.n} x {data.d} dataset to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvqgpr",
        description="Continuous-variable quantum Gaussian process regression simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_classical = sub.add_parser("classical", help="classical GPR baseline only")
    p_run = sub.add_parser("run", help="full quantum estimation experiment")
    p_sweep = sub.add_parser("sweep", help="run an experiment per axis value")
    p_gen = sub.add_parser("gen", help="write a synthetic training-set CSV")

    for p in (p_classical, p_run, p_sweep):
        p.add_argument("--config", help="INI config file; flags override it")
        p.add_argument("--x-star", dest="x_star", help="test point, comma-separated")
        p.add_argument("--seed", type=int)
        p.add_argument("--output", help="write the JSON report here")
        _add_data_args(p)
        _add_kernel_args(p)
    for p in (p_run, p_sweep):
        _add_quantum_args(p)
        p.add_argument("--csv", help="append a flat CSV row here")
        p.add_argument("--variance", dest="variance", action="store_true",
                       default=None, help="also run the variance pipeline (default)")
        p.add_argument("--no-variance", dest="variance", action="store_false")
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated, strictly increasing")

    p_gen.add_argument("--config", help="INI config file; flags override it")
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--output", required=False)
    _add_data_args(p_gen)
    _add_kernel_args(p_gen)

    p_classical.set_defaults(func=_cmd_classical)
    p_run.set_defaults(func=_cmd_run)
    p_sweep.set_defaults(func=_cmd_sweep)
    p_gen.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps({"error": str(exc), "kind": "input"}), file=sys.stderr)
        return EXIT_INPUT
    except ConditioningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps({"error": str(exc), "kind": "conditioning"}), file=sys.stderr)
        return EXIT_CONDITIONING
    except (CvqgprError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps({"error": str(exc), "kind": "numerical"}), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
