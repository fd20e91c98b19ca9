"""``repmix`` command-line interface.

Subcommands ``fit``, ``simulate``, ``bench``, ``zk`` and ``geometry`` read
one JSON config (``--config``) whose sections mirror the library's config
types::

    {"prior": {...}, "chain": {...}, "sid": {...}, "scenario": {...},
     "fit": {...}, "bench": {...}, "zk": {...}, "geometry": {...}}

Any field can be overridden with ``--section.field=value``; values are
parsed as JSON when possible and kept as strings otherwise.

Exit status is 0 on success, 2 for usage, config or I/O errors (with one
JSON line on stderr), and 3 when a benchmark cell has too many failed
replicates.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import METHODS, SidConfig, model_parts, run_method
from .core import (
    EstimateUnderflowError,
    PriorConfig,
    ReproMixError,
    read_dataset_csv,
    write_dataset_csv,
)
from .metrics import CSV_FIELDS, evaluate, relabel_draws
from .normalizer import ZkEntry, ZkTable, estimate_zk, theorem1_diagnostic, zk_cache_key
from .sampler import ChainConfig, write_draws_jsonl
from .simbench import ScenarioSpec, gen_scenario, geometry_report, run_benchmark

EXIT_USAGE = 2
EXIT_BENCH = 3
SECTIONS = ("prior", "chain", "sid", "scenario", "fit", "bench", "zk", "geometry")
FIT_METHODS = ("rgrm", "rrm", "mfm", "sid", "sid1", "sid2")


class CliError(ReproMixError):
    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: dict, tokens) -> dict:
    """Apply ``--section.field=value`` (or ``--section.field value``) tokens."""
    config = json.loads(json.dumps(config))
    tokens = list(tokens)
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or "." not in tok:
            raise CliError("usage", f"unrecognized argument {tok!r}")
        if "=" in tok:
            key, value = tok[2:].split("=", 1)
        else:
            if i + 1 >= len(tokens):
                raise CliError("usage", f"missing value for {tok}")
            key, value = tok[2:], tokens[i + 1]
            i += 1
        path = key.split(".")
        if path[0] not in SECTIONS:
            raise CliError("config", f"unknown config section {path[0]!r}")
        node = config
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise CliError("config", f"cannot override inside non-object {key!r}")
        node[path[-1]] = _parse_value(value)
        i += 1
    return config


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError("io", f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError("config", f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise CliError("config", "config must be a JSON object")
    unknown = set(data) - set(SECTIONS) - {"schema_version"}
    if unknown:
        raise CliError("config", f"unknown config sections {sorted(unknown)}")
    return data


def _section(config, name) -> dict:
    sec = config.get(name, {})
    if not isinstance(sec, dict):
        raise CliError("config", f"section {name!r} must be an object")
    return dict(sec)


def _prior(config) -> PriorConfig:
    try:
        return PriorConfig.from_dict(_section(config, "prior"))
    except TypeError as exc:
        raise CliError("config", f"prior: {exc}") from None


def _chain(config, seed) -> ChainConfig:
    sec = _section(config, "chain")
    if seed is not None:
        sec["seed"] = seed
    unknown = set(sec) - set(ChainConfig.__dataclass_fields__)
    if unknown:
        raise CliError("config", f"unknown chain fields {sorted(unknown)}")
    return ChainConfig(**sec)


def _sid(config, prior) -> SidConfig:
    sec = _section(config, "sid")
    base = {"k_fit": prior.k_max, "tau2": prior.tau2, "a0": prior.a0, "b0": prior.b0}
    return SidConfig.from_dict({**base, **sec})


def _scenario(config, seed) -> ScenarioSpec:
    sec = _section(config, "scenario")
    sid = sec.pop("id", "toy")
    n_per = sec.pop("n_per", 1000 if sid == "toy" else 50)
    sc_seed = sec.pop("seed", 0) if seed is None else seed
    if sec:
        raise CliError("config", f"unknown scenario fields {sorted(sec)}")
    return ScenarioSpec(sid, n_per, sc_seed)


def _read_data(path):
    try:
        return read_dataset_csv(path)
    except FileNotFoundError:
        raise CliError("io", f"no such file: {path}") from None
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc.strerror or exc}") from None


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError("io", f"cannot create output directory {out}: {exc.strerror or exc}") from None
    return out


def cmd_fit(args, config) -> int:
    prior = _prior(config)
    chain = _chain(config, args.seed)
    fit = _section(config, "fit")
    method = fit.pop("method", "rgrm")
    rmse = fit.pop("rmse", "ols")
    label = fit.pop("scenario", "")
    if fit:
        raise CliError("config", f"unknown fit fields {sorted(fit)}")
    if method not in FIT_METHODS:
        raise CliError("config", f"unknown method {method!r}; expected one of {FIT_METHODS}")
    if rmse not in ("ols", "draws"):
        raise CliError("config", f"unknown rmse variant {rmse!r}")
    sid = _sid(config, prior)
    dataset, z_true = _read_data(args.data)
    out = _out_dir(args)

    draws = relabel_draws(run_method(method, dataset, prior, chain, sid=sid))
    rep = evaluate(dataset, draws, z_true, rmse=rmse, eff_threshold=sid.eff_threshold, relabeled=True)
    write_draws_jsonl(out / "draws.jsonl", draws)
    row = rep.to_row(label, method, chain.seed)
    fields = [f for f in CSV_FIELDS if z_true is not None or f not in ("ari", "purity")]
    with (out / "report.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        w.writerow([_cell(row[f]) for f in fields])
    return 0


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def cmd_simulate(args, config) -> int:
    spec = _scenario(config, args.seed)
    out = _out_dir(args)
    dataset, z = gen_scenario(spec)
    write_dataset_csv(out / "data.csv", dataset, z)
    return 0


def cmd_bench(args, config) -> int:
    prior = _prior(config)
    chain = _chain(config, None)
    bench = _section(config, "bench")
    scenarios = bench.pop("scenarios", [["s1", 25]])
    methods = bench.pop("methods", "all")
    reps = bench.pop("reps", 20)
    rmse = bench.pop("rmse", "ols")
    base_seed = bench.pop("base_seed", 0) if args.seed is None else args.seed
    if bench:
        raise CliError("config", f"unknown bench fields {sorted(bench)}")
    if methods == "all":
        methods = list(METHODS)
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",")]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise CliError("config", f"unknown methods {bad}; expected a subset of {METHODS}")
    sid = SidConfig.from_dict(_section(config, "sid")) if config.get("sid") else None
    try:
        specs = [ScenarioSpec(s[0], int(s[1])) for s in scenarios]
    except (TypeError, IndexError, ValueError) as exc:
        raise CliError("config", f"bench.scenarios must be [id, n_per] pairs: {exc}") from None
    out = _out_dir(args)
    result = run_benchmark(specs, methods, int(reps), int(base_seed), chain, prior,
                           jobs=args.jobs, sid=sid, rmse=rmse)
    result.write(out)
    if result.invalid_cells:
        failures = [
            {"scenario": c["scenario"], "n": c["n"], "method": c["method"], "failures": c["failures"]}
            for c in result.invalid_cells
        ]
        print(json.dumps({"error": "bench-cell", "cells": failures}), file=sys.stderr)
        return EXIT_BENCH
    return 0


def cmd_zk(args, config) -> int:
    prior = _prior(config)
    zk_cfg = _section(config, "zk")
    method = zk_cfg.pop("method", "rgrm")
    seed = zk_cfg.pop("seed", 0) if args.seed is None else args.seed
    if zk_cfg:
        raise CliError("config", f"unknown zk fields {sorted(zk_cfg)}")
    if method not in ("rgrm", "rrm", "mfm"):
        raise CliError("config", f"zk needs a collapsed model, got {method!r}")
    if args.data is not None:
        dataset, _ = _read_data(args.data)
    else:
        dataset, _ = gen_scenario(_scenario(config, None))
    out = _out_dir(args)
    kernel, coef = model_parts(method, dataset, prior)

    table = ZkTable(seed=seed, k_max=prior.k_max, key=zk_cache_key(dataset, prior, kernel, seed, coef))
    table.entries[1] = ZkEntry(0.0, 0.0, 0)
    warnings = []
    for K in range(2, prior.k_max + 1):
        try:
            table.entries[K] = estimate_zk(K, dataset, prior, kernel, seed, coef, jobs=args.jobs)
        except EstimateUnderflowError as exc:
            warnings.append({"K": K, "kind": exc.kind, "message": str(exc)})
    for w in warnings:
        print(json.dumps({"warning": w["kind"], "K": w["K"], "message": w["message"]}), file=sys.stderr)
    payload = table.to_json()
    diag = theorem1_diagnostic(table)
    diag["per_k_ratios"] = {str(k): v for k, v in diag["per_k_ratios"].items()}
    payload["diagnostic"] = diag
    payload["warnings"] = warnings
    payload["kernel"] = {"metric": kernel.metric, "g0": kernel.g0}
    _write_json(out / "zk.json", payload)
    return 0


def _read_betas(path) -> np.ndarray:
    try:
        with Path(path).open() as fh:
            rows = [r for r in csv.reader(fh) if r]
    except FileNotFoundError:
        raise CliError("io", f"no such file: {path}") from None
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        float(rows[0][0])
    except (ValueError, IndexError):
        rows = rows[1:]
    try:
        arr = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise CliError("io", f"{path}: non-numeric coefficient entry ({exc})") from None
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise CliError("config", "geometry needs at least two coefficient vectors")
    return arr


def cmd_geometry(args, config) -> int:
    betas = _read_betas(args.betas)
    geo = _section(config, "geometry")
    g = geo.pop("g", None)
    gram = geo.pop("gram", None)
    if geo:
        raise CliError("config", f"unknown geometry fields {sorted(geo)}")
    p = betas.shape[1]
    if args.data is not None:
        dataset, _ = _read_data(args.data)
        metric = dataset
        g = dataset.n if g is None else g
    elif gram is not None:
        metric = np.asarray(gram, dtype=float)
        g = 1.0 if g is None else g
    else:
        metric = np.eye(p)
        g = 1.0 if g is None else g
    out = _out_dir(args)
    report = geometry_report(metric, betas, float(g))
    report["g"] = float(g)
    _write_json(out / "geometry.json", report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="override the command's seed")
    common.add_argument("--jobs", type=int, default=1, help="worker count (results do not depend on it)")
    common.add_argument("--out", default=".", help="output directory")

    parser = argparse.ArgumentParser(
        prog="repmix",
        description="Repulsive mixtures of regressions: fit, simulate, benchmark.",
        epilog="Config fields can be overridden with --section.field=value, e.g. --prior.g0=0.5",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("fit", parents=[common], help="fit a model to a CSV dataset")
    p.add_argument("data", help="CSV with columns x1..xp, y and optionally z_true")
    sub.add_parser("simulate", parents=[common], help="write a simulated scenario dataset")
    sub.add_parser("bench", parents=[common], help="run the replication benchmark")
    p = sub.add_parser("zk", parents=[common], help="estimate and store the Z_K table")
    p.add_argument("data", nargs="?", help="CSV dataset (default: simulate the config scenario)")
    p = sub.add_parser("geometry", parents=[common], help="compare coefficient and predictive distances")
    p.add_argument("betas", help="CSV with one coefficient vector per row")
    p.add_argument("--data", help="CSV dataset whose design defines the predictive metric")
    return parser


COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "zk": cmd_zk,
    "geometry": cmd_geometry,
}


def _error(kind, message) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return EXIT_USAGE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    try:
        if args.jobs < 1:
            raise CliError("usage", "--jobs must be at least 1")
        config = apply_overrides(load_config(args.config), extra)
        return COMMANDS[args.command](args, config)
    except ReproMixError as exc:
        return _error(exc.kind, str(exc))
    except OSError as exc:
        return _error("io", f"{exc.filename or ''}: {exc.strerror or exc}")
    except (TypeError, ValueError) as exc:
        return _error("config", str(exc))


if __name__ == "__main__":
    sys.exit(main())
