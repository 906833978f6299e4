"""Command line front end.

    mhmm fit      fit one model, write model.json and report.json
    mhmm compare  run methods x seeds and emit a median result table
    mhmm entropy  print the entropy of a saved model
    mhmm synth    write a synthetic dataset from a preset generator

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .datasets import PRESETS, load_dataset, load_libras, load_sequences_csv, sample_mixture, save_dataset
from .entropy import model_entropy
from .errors import ConfigError, DatasetError, NumericalError, ParameterError
from .fit import METHODS, FitConfig, fit
from .mixture import load_model, save_model

TABLE_SCHEMA = "mhmm.table/1"
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_FIT_KEYS = ("max_iterations", "rel_tol", "init_dirichlet_alpha", "lam", "gate_enabled")


# ------------------------------------------------------------ config helpers

def _parse_lambda(text):
    if text is None:
        return None
    if str(text).lower() == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"--lambda must be a number or 'auto', got {text!r}") from None


def _parse_seeds(text):
    """``"0:11"`` (range), ``"1,5,9"`` or a single integer."""
    text = str(text)
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            seeds = list(range(int(lo), int(hi)))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}") from None
    if not seeds:
        raise ConfigError("at least one seed is required")
    return seeds


def _read_config(path):
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def _dataset_spec_from_args(args):
    spec = {}
    if args.data is not None:
        spec["path"] = args.data
    if args.libras is not None:
        try:
            spec["digit_pair"] = [int(c) for c in args.libras.split(",")]
        except ValueError:
            raise ConfigError(f"--libras expects 'A,B', got {args.libras!r}") from None
        if len(spec["digit_pair"]) != 2:
            raise ConfigError("--libras expects exactly two classes")
    for key in ("layout", "element_type", "label_column", "dims"):
        if getattr(args, key, None) is not None:
            spec[key] = getattr(args, key)
    if args.standardize:
        spec["standardize"] = True
    return spec


def load_from_spec(spec: dict):
    """Build a :class:`SequenceDataset` from a declarative dataset spec."""
    if "path" not in spec:
        raise ConfigError("dataset spec needs a 'path'")
    path = spec["path"]
    fmt = spec.get("format")
    if fmt is None:
        fmt = "libras" if "digit_pair" in spec else ("json" if str(path).endswith(".json") else "csv")
    if fmt == "libras":
        return load_libras(path, spec.get("digit_pair", (1, 8)), spec.get("standardize", False))
    if fmt == "json":
        ds = load_dataset(path)
    elif fmt == "csv":
        label = spec.get("label_column")
        if isinstance(label, str) and label.lstrip("-").isdigit():
            label = int(label)
        ds = load_sequences_csv(path, spec.get("layout"), spec.get("element_type"), label,
                                spec.get("dims"))
    else:
        raise ConfigError(f"unknown dataset format {fmt!r}")
    return ds.standardized() if spec.get("standardize") else ds


def _fit_kwargs(conf, args):
    fit_conf = dict(conf.get("fit", {}))
    unknown = set(fit_conf) - set(_FIT_KEYS)
    if unknown:
        raise ConfigError(f"unknown fit options {sorted(unknown)}")
    for key, attr in (("max_iterations", "max_iters"), ("rel_tol", "tol"),
                      ("init_dirichlet_alpha", "alpha")):
        if getattr(args, attr, None) is not None:
            fit_conf[key] = getattr(args, attr)
    lam = _parse_lambda(args.lam)
    if lam is not None:
        fit_conf["lam"] = lam
    if getattr(args, "no_gate", False):
        fit_conf["gate_enabled"] = False
    return fit_conf


def _require_int(conf, key, args_value):
    value = args_value if args_value is not None else conf.get(key)
    if value is None:
        raise ConfigError(f"missing required setting {key!r}")
    if int(value) < 1:
        raise ConfigError(f"{key} must be >= 1")
    return int(value)


# ---------------------------------------------------------------- commands

def _run_one(task):
    data, K, J, fit_conf = task
    _, report = fit(data, K, J, FitConfig(**fit_conf))
    return report


def cmd_fit(args) -> int:
    conf = _read_config(args.config)
    spec = dict(conf.get("dataset", {}), **_dataset_spec_from_args(args))
    data = load_from_spec(spec)
    K = _require_int(conf, "K", args.k)
    J = _require_int(conf, "J", args.states)
    method = args.method or conf.get("method") or (conf.get("methods") or ["standard"])[0]
    seed = args.seed if args.seed is not None else (conf.get("seeds") or [conf.get("seed", 0)])[0]
    config = FitConfig(method=method, seed=int(seed), **_fit_kwargs(conf, args))
    model, report = fit(data, K, J, config)
    out = Path(args.out or conf.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    report.save(out / "report.json")
    vm = "n/a" if report.v_measure is None else f"{100 * report.v_measure:.1f}%"
    print(f"{data.name}: method={method} iterations={report.iterations} "
          f"log-likelihood={report.final_log_likelihood:.4f} "
          f"entropy={100 * report.entropy.model_average_normalized:.1f}% v-measure={vm}")
    return 0


def run_comparison(datasets, K, J, methods, seeds, fit_conf, jobs=1) -> dict:
    """Fit every (dataset, method, seed) and aggregate medians per (dataset, method)."""
    tasks, keys = [], []
    for data in datasets:
        for method in methods:
            for seed in seeds:
                tasks.append((data, K, J, dict(fit_conf, method=method, seed=seed)))
                keys.append((data.name, method, seed))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_one, tasks))
    else:
        reports = [_run_one(t) for t in tasks]

    rows = []
    for data in datasets:
        for method in methods:
            runs = [
                {"seed": seed, "v_measure": rep.v_measure,
                 "entropy": rep.entropy.model_average_normalized,
                 "iterations": rep.iterations, "log_likelihood": rep.final_log_likelihood}
                for (name, meth, seed), rep in zip(keys, reports)
                if name == data.name and meth == method
            ]
            vms = [r["v_measure"] for r in runs if r["v_measure"] is not None]
            rows.append({
                "dataset": data.name,
                "method": method,
                "v_measure_pct": 100 * float(np.median(vms)) if vms else None,
                "entropy_pct": 100 * float(np.median([r["entropy"] for r in runs])),
                "iterations": float(np.median([r["iterations"] for r in runs])),
                "runs": runs,
            })
    return {"schema": TABLE_SCHEMA, "K": K, "J": J, "methods": list(methods),
            "seeds": list(seeds), "fit": fit_conf, "rows": rows}


def render_table(table: dict) -> str:
    """Plain-text table: one line per dataset, v-measure / entropy / iterations per method."""
    methods = table["methods"]
    datasets = list(dict.fromkeys(r["dataset"] for r in table["rows"]))
    cells = {(r["dataset"], r["method"]): r for r in table["rows"]}

    def pct(x):
        return "-" if x is None else f"{x:.0f}%"

    def num(x):
        return f"{x:g}"

    header = ["dataset"]
    for title in ("V-measure", "Entropy", "Iterations"):
        header += [f"{title} {m}" for m in methods]
    lines = [header]
    for name in datasets:
        line = [name]
        line += [pct(cells[name, m]["v_measure_pct"]) for m in methods]
        line += [pct(cells[name, m]["entropy_pct"]) for m in methods]
        line += [num(cells[name, m]["iterations"]) for m in methods]
        lines.append(line)
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    out = []
    for n, row in enumerate(lines):
        out.append(" | ".join(cell.ljust(w) if i == 0 else cell.rjust(w)
                              for i, (cell, w) in enumerate(zip(row, widths))))
        if n == 0:
            out.append("-+-".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def cmd_compare(args) -> int:
    conf = _read_config(args.config)
    cli_spec = _dataset_spec_from_args(args)
    if cli_spec:
        specs = [dict(conf.get("dataset", {}), **cli_spec)]
    elif "datasets" in conf:
        specs = conf["datasets"]
    elif "dataset" in conf:
        specs = [conf["dataset"]]
    else:
        raise ConfigError("no dataset given (use --data/--libras or a config file)")
    datasets = [load_from_spec(s) for s in specs]
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ConfigError(f"dataset names must be unique, got {names}")
    K = _require_int(conf, "K", args.k)
    J = _require_int(conf, "J", args.states)
    methods = args.methods.split(",") if args.methods else conf.get("methods", list(METHODS))
    if not methods or any(m not in METHODS for m in methods):
        raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {methods}")
    seeds = _parse_seeds(args.seeds) if args.seeds else conf.get("seeds", [0])
    if not seeds:
        raise ConfigError("at least one seed is required")
    fit_conf = _fit_kwargs(conf, args)
    for m in methods:  # validate before running anything
        FitConfig(method=m, **fit_conf)
    table = run_comparison(datasets, K, J, methods, [int(s) for s in seeds], fit_conf, args.jobs)
    text = render_table(table)
    out = args.out or conf.get("out")
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.json").write_text(json.dumps(table, indent=1, sort_keys=True) + "\n")
        (out / "table.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_entropy(args) -> int:
    model = load_model(args.model)
    rep = model_entropy(model)
    if args.json:
        print(json.dumps(rep.to_dict(), indent=1))
        return 0
    print(f"{'component':>9}  {'nats':>10}  {'normalized':>10}")
    for k, (h, hn) in enumerate(zip(rep.per_component_nats, rep.per_component_normalized)):
        print(f"{k:>9}  {h:>10.6f}  {100 * hn:>9.2f}%")
    print(f"model average: {100 * rep.model_average_normalized:.2f}%")
    return 0


def cmd_synth(args) -> int:
    model = PRESETS[args.preset]()
    data = sample_mixture(model, args.n_per_component, args.length, args.seed)
    save_dataset(data, args.out)
    if args.model_out:
        save_model(model, args.model_out)
    print(f"wrote {len(data)} sequences of length {args.length} to {args.out}")
    return 0


# ------------------------------------------------------------------ parser

def _add_dataset_args(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--data", help="dataset path (.json document, CSV, or the Libras file)")
    g.add_argument("--libras", metavar="A,B", help="load two classes of the Libras corpus from --data")
    g.add_argument("--layout", choices=("row-per-sequence", "long-format"))
    g.add_argument("--element-type", dest="element_type", choices=("categorical", "real", "count"))
    g.add_argument("--label-column", dest="label_column")
    g.add_argument("--dims", type=int, help="values per time step in row-per-sequence CSV")
    g.add_argument("--standardize", action="store_true", help="z-score real-valued data")


def _add_fit_args(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--k", type=int, help="number of mixture components")
    p.add_argument("--states", type=int, help="hidden states per component")
    p.add_argument("--lambda", dest="lam", help="prior strength (>= 1) or 'auto'")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", type=float, help="relative log-likelihood tolerance")
    p.add_argument("--alpha", type=float, help="Dirichlet concentration for transition init")
    p.add_argument("--no-gate", dest="no_gate", action="store_true",
                   help="always use the regularized transition update")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhmm", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one model")
    _add_dataset_args(p)
    _add_fit_args(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("compare", help="methods x seeds result table")
    _add_dataset_args(p)
    _add_fit_args(p)
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--seeds", help="'0:11', '1,2,3' or a single seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("entropy", help="entropy of a saved model")
    p.add_argument("model")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("synth", help="sample a synthetic dataset")
    p.add_argument("--preset", choices=sorted(PRESETS), default="separated")
    p.add_argument("--n-per-component", dest="n_per_component", type=int, default=20)
    p.add_argument("--length", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--model-out", dest="model_out", help="also save the generating model")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatasetError, ParameterError) as exc:
        print(f"mhmm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"mhmm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
