"""Command-line front end: ``bayesdd train|score|benchmark|sweep|synth``.

Every subcommand accepts ``--config FILE`` (a JSON document with the keys of
``DEFAULTS``); flags given on the command line override the file. The
environment variable ``BAYESDD_OUTPUT_DIR`` overrides the configured output
directory, and ``--output-dir`` overrides both. Relative output file names
are resolved against that directory.

Exit status: 0 success, 2 configuration error, 3 data error, 4 solver did
not converge (outputs are still written).
"""
import argparse
import copy
import csv
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from .data import Dataset, load_dataset, make_one_class_split, save_csv, standardize
from .errors import BayesDDError, ConvergenceWarning
from .evaluation import (ExperimentConfig, METHODS, outlier_ratio_sweep, precision_for_scores,
                         rank, run_benchmark, select_hyperparameters, summarize_sweep,
                         train_method, write_benchmark, write_sweep)
from .model import dumps, load_model
from .synth import SHAPES, make_shape

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NOT_CONVERGED = 0, 2, 3, 4
OUTPUT_DIR_ENV = "BAYESDD_OUTPUT_DIR"
FORMATS = ("csv", "libsvm", "builtin")

DEFAULTS = {
    "dataset": {"path": None, "format": None, "label_column": -1, "has_header": True,
                "unlabeled_path": None},
    "target_class": None,
    "method": "bdd",
    "sigma": "cv",
    "nu": "cv",
    "standardize": True,
    "folds": 10,
    "graph_k": 7,
    "epsilon": 1e-3,
    "use_laplacian_precision": False,
    "unlabeled_fraction": None,
    "seed": 0,
    "max_iterations": 50_000,
    "tolerance": 1e-8,
    "datasets": ["iris", "glass"],
    "methods": ["svdd", "bdd"],
    "repetitions": 10,
    "semi_supervised": False,
    "ratios": [0.1, 0.3, 0.5, 0.7],
    "seeds": 10,
    "shape": "s_curve",
    "n": 500,
    "noise": 0.1,
    "output": {"dir": ".", "model": "model.json", "report": "report.json",
               "scores": "scores.csv", "table_csv": "benchmark.csv",
               "table_json": "benchmark.json", "sweep_csv": "sweep.csv",
               "data": "synth.csv"},
}


class ConfigError(Exception):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class DataError(BayesDDError):
    pass


def _merge(base, override, prefix=""):
    for key, value in override.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(path, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(path, "expected an object")
            _merge(base[key], value, path + ".")
        else:
            base[key] = value


def _number(cfg, key, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    value = cfg[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if integer and value != int(value):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ConfigError(key, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and (value > hi or (hi_open and value == hi)):
        raise ConfigError(key, f"must be {'<' if hi_open else '<='} {hi}, got {value}")
    return int(value) if integer else float(value)


def _check_method(name, path):
    if name not in METHODS:
        raise ConfigError(path, f"unknown method {name!r}; choose from {list(METHODS)}")


def _check_nu(cfg, methods):
    if cfg["nu"] == "cv":
        return
    _number(cfg, "nu", 0.0, 1.0, lo_open=True)
    if any(m in ("bdd", "ssdd") for m in methods) and cfg["nu"] >= 1.0:
        raise ConfigError("nu", "must lie in (0, 1) for bdd and ssdd")


def validate(cfg, command):
    """Check ranges and required fields; returns the config with numbers normalized."""
    if cfg["sigma"] != "cv":
        cfg["sigma"] = _number(cfg, "sigma", 0.0, lo_open=True)
    cfg["epsilon"] = _number(cfg, "epsilon", 0.0, lo_open=True)
    cfg["graph_k"] = _number(cfg, "graph_k", 1, integer=True)
    cfg["folds"] = _number(cfg, "folds", 2, integer=True)
    cfg["seed"] = _number(cfg, "seed", 0, integer=True)
    cfg["max_iterations"] = _number(cfg, "max_iterations", 1, integer=True)
    cfg["tolerance"] = _number(cfg, "tolerance", 0.0, lo_open=True)
    for flag in ("standardize", "use_laplacian_precision", "semi_supervised"):
        if not isinstance(cfg[flag], bool):
            raise ConfigError(flag, f"expected true or false, got {cfg[flag]!r}")
    if cfg["unlabeled_fraction"] is not None:
        cfg["unlabeled_fraction"] = _number(cfg, "unlabeled_fraction", 0.0, 1.0, hi_open=True)
    ds = cfg["dataset"]
    if ds["format"] is not None and ds["format"] not in FORMATS:
        raise ConfigError("dataset.format", f"unknown format {ds['format']!r}; choose from "
                                            f"{list(FORMATS)}")
    label = ds["label_column"]
    if label is not None and (isinstance(label, bool) or not isinstance(label, (int, str))):
        raise ConfigError("dataset.label_column", f"expected a name, an index or null, "
                                                  f"got {label!r}")
    if command == "train":
        _check_method(cfg["method"], "method")
        if cfg["method"] != "ml":
            _check_nu(cfg, [cfg["method"]])
        if not ds["path"]:
            raise ConfigError("dataset.path", "required for train")
    elif command == "score":
        if not ds["path"]:
            raise ConfigError("dataset.path", "required for score")
    elif command in ("benchmark", "sweep"):
        if not isinstance(cfg["methods"], list) or not cfg["methods"]:
            raise ConfigError("methods", "expected a non-empty list")
        for i, m in enumerate(cfg["methods"]):
            _check_method(m, f"methods[{i}]")
        _check_nu(cfg, cfg["methods"])
        if command == "benchmark":
            cfg["repetitions"] = _number(cfg, "repetitions", 1, integer=True)
            if not isinstance(cfg["datasets"], list) or not cfg["datasets"]:
                raise ConfigError("datasets", "expected a non-empty list")
        else:
            if not ds["path"]:
                raise ConfigError("dataset.path", "required for sweep")
            if not isinstance(cfg["ratios"], list) or not cfg["ratios"]:
                raise ConfigError("ratios", "expected a non-empty list")
            for i, r in enumerate(cfg["ratios"]):
                if isinstance(r, bool) or not isinstance(r, (int, float)) or not 0 <= r < 1:
                    raise ConfigError(f"ratios[{i}]", f"must lie in [0, 1), got {r!r}")
            seeds = cfg["seeds"]
            if isinstance(seeds, list):
                if not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
                    raise ConfigError("seeds", "expected non-negative integers")
            else:
                cfg["seeds"] = _number(cfg, "seeds", 1, integer=True)
    elif command == "synth":
        if cfg["shape"] not in SHAPES:
            raise ConfigError("shape", f"unknown shape {cfg['shape']!r}; choose from "
                                       f"{list(SHAPES)}")
        cfg["n"] = _number(cfg, "n", 1, integer=True)
        cfg["noise"] = _number(cfg, "noise", 0.0)
    return cfg


# flag dest -> config path
FLAG_PATHS = {
    "dataset": ("dataset", "path"), "format": ("dataset", "format"),
    "label_column": ("dataset", "label_column"), "has_header": ("dataset", "has_header"),
    "unlabeled": ("dataset", "unlabeled_path"),
    "output_dir": ("output", "dir"), "model": ("output", "model"),
    "report": ("output", "report"), "scores": ("output", "scores"),
    "table_csv": ("output", "table_csv"), "table_json": ("output", "table_json"),
    "sweep_csv": ("output", "sweep_csv"), "out": ("output", "data"),
}


def _parse_scalar(text):
    """Flag values: numbers stay numbers, ``none`` is None, anything else is text."""
    if text.lower() == "none":
        return None
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def effective_config(args, command, environ=None):
    environ = os.environ if environ is None else environ
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("--config", "top level must be an object")
        _merge(cfg, doc)
    if environ.get(OUTPUT_DIR_ENV):
        cfg["output"]["dir"] = environ[OUTPUT_DIR_ENV]
    for dest, value in vars(args).items():
        if dest in ("config", "command", "handler") or value is None:
            continue
        if dest in FLAG_PATHS:
            section, key = FLAG_PATHS[dest]
            cfg[section][key] = value
        else:
            cfg[dest] = value
    return validate(cfg, command)


def _out(cfg, key):
    name = cfg["output"][key]
    return name if os.path.isabs(name) else os.path.join(cfg["output"]["dir"], name)


def _write_json(path, doc):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _write_config_sidecar(path, cfg):
    _write_json(path + ".config.json", cfg)


def _load(cfg, path=None):
    """Read ``path`` (default ``dataset.path``) with the configured format and labels."""
    ds = cfg["dataset"]
    source = path or ds["path"]
    try:
        return load_dataset(source, fmt=ds["format"], label_column=ds["label_column"],
                            has_header=ds["has_header"])
    except OSError as exc:
        raise DataError(f"cannot read {source}: {exc.strerror or exc}") from None


def _experiment_config(cfg):
    exp = ExperimentConfig(sigma=cfg["sigma"], folds=cfg["folds"], graph_k=cfg["graph_k"],
                           epsilon=cfg["epsilon"],
                           use_laplacian_precision=cfg["use_laplacian_precision"],
                           semi_supervised=cfg["semi_supervised"],
                           standardize=cfg["standardize"],
                           solver_options={"max_iterations": cfg["max_iterations"],
                                           "tolerance": cfg["tolerance"]})
    if cfg["unlabeled_fraction"] is not None:
        exp.unlabeled_fraction = cfg["unlabeled_fraction"]
    if cfg["nu"] != "cv":
        exp.nu = {m: cfg["nu"] for m in METHODS}
    return exp


def cmd_train(cfg):
    """Fit one model; with ``target_class`` the one-class split protocol is used
    and the report includes test precision."""
    dataset = _load(cfg)
    method = cfg["method"]
    exp = _experiment_config(cfg)
    report = {"config": cfg, "method": method}
    test = None
    unlabeled = np.zeros((0, dataset.dim))
    if cfg["target_class"] is not None:
        target = str(cfg["target_class"])
        if target not in {str(c) for c in dataset.classes()}:
            raise DataError(f"target class {target!r} not present in {cfg['dataset']['path']}")
        fraction = cfg["unlabeled_fraction"]
        if fraction is None:
            fraction = exp.unlabeled_fraction if method == "ssdd" else 0.0
        split = make_one_class_split(dataset, target, cfg["seed"], fraction)
        X, unlabeled = split.train_targets, split.unlabeled_pool
        test = (split.test_features, split.test_is_target)
        report["split"] = split.manifest()
    else:
        X = dataset.features
        if cfg["dataset"]["unlabeled_path"]:
            unlabeled = _load(cfg, cfg["dataset"]["unlabeled_path"]).features

    record = None
    if cfg["standardize"]:
        X, (unlabeled,), record = standardize(X, [unlabeled])
    sigma, nu = select_hyperparameters("bdd" if method == "ssdd" else method, X,
                                       cfg["seed"], exp)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        start = time.perf_counter()
        model = train_method(method, X, sigma, nu, X_unlabeled=unlabeled, config=exp)
        elapsed = time.perf_counter() - start
    if record is not None:
        model.input_mean, model.input_scale = record.mean, record.scale

    report.update({
        "sigma": sigma, "nu": nu, "n_train": int(X.shape[0]),
        "n_unlabeled": int(unlabeled.shape[0]),
        "support_vectors": int(model.support_indices.size),
        "iterations": model.solver.get("iterations"),
        "kkt_residual": model.solver.get("kkt_residual"),
        "converged": bool(model.converged),
        "wall_time": elapsed,
    })
    if test is not None:
        report["precision"] = precision_for_scores(model.score(test[0]), test[1])
        report["n_test"] = int(test[1].size)
        report["n_test_targets"] = int(test[1].sum())

    doc = json.loads(dumps(model))
    doc["config"] = cfg
    _write_json(_out(cfg, "model"), doc)
    _write_json(_out(cfg, "report"), report)
    print(f"trained {method}: {report['support_vectors']} support vectors, "
          f"{report['iterations']} iterations, kkt residual {report['kkt_residual']:.3g}, "
          f"{elapsed:.3f} s" + (f", precision {report['precision']:.4f}"
                                if "precision" in report else ""))
    return EXIT_OK if model.converged else EXIT_NOT_CONVERGED


def score_rows(model, Z):
    """``(index, score, rank)`` rows in rank order; rank 1 is the most target-like."""
    scores = model.score(Z)
    order = rank(scores).order
    return [(int(i), float(scores[i]), r + 1) for r, i in enumerate(order)]


def cmd_score(cfg):
    path = _out(cfg, "model")
    try:
        model = load_model(path)
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc.strerror or exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"unreadable model {path}: {exc}") from None
    dataset = _load(cfg)
    rows = score_rows(model, dataset.features)
    out = _out(cfg, "scores")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "score", "rank"])
        for index, value, r in rows:
            w.writerow([index, repr(value), r])
    _write_config_sidecar(out, cfg)
    print(f"scored {len(rows)} rows -> {out}")
    return EXIT_OK


def cmd_benchmark(cfg):
    exp = _experiment_config(cfg)
    rows = run_benchmark(cfg["datasets"], cfg["methods"], cfg["repetitions"], cfg["seed"], exp,
                         loader=lambda name: _load(cfg, name))
    csv_path, json_path = _out(cfg, "table_csv"), _out(cfg, "table_json")
    os.makedirs(os.path.dirname(csv_path) or ".", exist_ok=True)
    os.makedirs(os.path.dirname(json_path) or ".", exist_ok=True)
    write_benchmark(rows, csv_path, json_path, config=cfg)
    _write_config_sidecar(csv_path, cfg)
    for row in rows:
        if row.error:
            print(f"{row.dataset:>10} {row.method:>5}  error: {row.error}")
        else:
            print(f"{row.dataset:>10} {row.method:>5}  {row.mean_precision:.4f} +- "
                  f"{row.std_precision:.4f}  ({row.mean_runtime:.4f} s)")
    return EXIT_OK


def cmd_sweep(cfg):
    exp = _experiment_config(cfg)
    seeds = cfg["seeds"] if isinstance(cfg["seeds"], list) else list(range(cfg["seeds"]))
    rows = outlier_ratio_sweep(_load(cfg), cfg["ratios"], cfg["methods"], seeds, config=exp)
    out = _out(cfg, "sweep_csv")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    write_sweep(rows, out)
    _write_config_sidecar(out, cfg)
    for (ratio, method), value in summarize_sweep(rows).items():
        print(f"ratio {ratio:.3f} {method:>5}  {value:.4f}")
    return EXIT_OK


def cmd_synth(cfg):
    X = make_shape(cfg["shape"], cfg["n"], noise=cfg["noise"], seed=cfg["seed"])
    out = _out(cfg, "data")
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    save_csv(Dataset(X, ["target"] * X.shape[0], name=cfg["shape"]), out)
    _write_config_sidecar(out, cfg)
    print(f"wrote {X.shape[0]} {cfg['shape']} points -> {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="bayesdd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--output-dir", help=f"output directory (overrides ${OUTPUT_DIR_ENV})")
        p.add_argument("--seed", type=int)

    def data_flags(p):
        p.add_argument("--dataset", help="builtin name (iris, glass) or file path")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--label-column", type=_parse_scalar,
                       help="label column name or index; 'none' for unlabeled files")
        p.add_argument("--no-header", dest="has_header", action="store_false", default=None)

    def model_flags(p):
        p.add_argument("--sigma", type=_parse_scalar, help="kernel width or 'cv'")
        p.add_argument("--nu", type=_parse_scalar, help="nu or 'cv'")
        p.add_argument("--folds", type=int)
        p.add_argument("--graph-k", type=int)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--laplacian", dest="use_laplacian_precision", action="store_true",
                       default=None, help="use the graph Laplacian prior precision")
        p.add_argument("--unlabeled-fraction", type=float)
        p.add_argument("--no-standardize", dest="standardize", action="store_false",
                       default=None)
        p.add_argument("--max-iterations", type=int)
        p.add_argument("--tolerance", type=float)

    p = sub.add_parser("train", help="fit a data description")
    common(p), data_flags(p), model_flags(p)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--target-class", help="run the one-class split with this target class")
    p.add_argument("--unlabeled", help="file of unlabeled samples (ssdd without a split)")
    p.add_argument("--model", help="model file name")
    p.add_argument("--report", help="report file name")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("score", help="score a data file with a trained model")
    common(p), data_flags(p)
    p.add_argument("--model", help="model file")
    p.add_argument("--scores", help="output CSV name")
    p.set_defaults(handler=cmd_score)

    p = sub.add_parser("benchmark", help="precision@k tables over repeated splits")
    common(p), model_flags(p)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--datasets", nargs="+")
    p.add_argument("--methods", nargs="+", choices=METHODS)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--semi-supervised", action="store_true", default=None)
    p.add_argument("--table-csv")
    p.add_argument("--table-json")
    p.set_defaults(handler=cmd_benchmark)

    p = sub.add_parser("sweep", help="precision as the outlier share grows")
    common(p), data_flags(p), model_flags(p)
    p.add_argument("--methods", nargs="+", choices=METHODS)
    p.add_argument("--ratios", nargs="+", type=float)
    p.add_argument("--seeds", type=int, help="number of seeds 0..N-1")
    p.add_argument("--sweep-csv")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("synth", help="write a 2-D synthetic dataset")
    common(p)
    p.add_argument("--shape", choices=SHAPES)
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--out", help="output CSV name")
    p.set_defaults(handler=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = args.handler
    try:
        cfg = effective_config(args, args.command)
    except ConfigError as exc:
        print(f"bayesdd: config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return handler(cfg)
    except (DataError, BayesDDError) as exc:
        print(f"bayesdd: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
