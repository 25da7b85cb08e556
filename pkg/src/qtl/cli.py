"""Command-line entry point: ``qtl gen-data | train | eval | effdim-sweep``.

Settings come from built-in defaults, then ``QTL_SEED`` (seed only), then an
optional JSON config file, then command-line flags. Every output file starts
with a ``# config:`` comment holding the resolved settings.

Exit codes: 0 success, 1 usage/config error, 2 data or I/O error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .ansatz import AnsatzSpec
from .data import AngleScaler, DataFormatError, Dataset, gen_synthetic, load_features, save_features, split_fraction
from .effdim import EffDimConfig, EffDimReport, local_effective_dimension
from .hybrid import (
    TrainConfig,
    TrainingDivergedError,
    evaluate,
    fit,
    init_model,
    load_checkpoint,
    prepare,
    save_checkpoint,
)

log = logging.getLogger("qtl")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(float(v)) for v in text.split(",") if v]


DEFAULTS = {
    "seed": 0,
    "data": {"n": 100, "dim": 3, "sigma": 0.5, "separation": 1.0},
    "ansatz": {"family": "strong_entangling", "layers": 3, "qubits": 3, "reuploading": False},
    "train": {
        "epochs": 20, "batch_size": 64, "learning_rate": 0.05, "head_learning_rate": 0.01,
        "adapter_learning_rate": None, "optimizer": "adam", "train_fraction": 0.8, "train_head": True,
        "angle_range": [0.0, float(np.pi / 2)],
    },
    "effdim": {
        "families": ["real_amplitudes", "strong_entangling"],
        "n_grid": [1000, 10000, 100000, 1000000],
        "lambda": 1.0, "epsilon_scale": 1.05, "samples": 256, "theta_mode": "fixed",
    },
}

# flag dest -> (section, key)
FLAG_MAP = {
    "n": ("data", "n"), "dim": ("data", "dim"), "sigma": ("data", "sigma"),
    "separation": ("data", "separation"),
    "family": ("ansatz", "family"), "layers": ("ansatz", "layers"), "qubits": ("ansatz", "qubits"),
    "reupload": ("ansatz", "reuploading"),
    "epochs": ("train", "epochs"), "batch_size": ("train", "batch_size"),
    "lr": ("train", "learning_rate"), "head_lr": ("train", "head_learning_rate"),
    "adapter_lr": ("train", "adapter_learning_rate"),
    "optimizer": ("train", "optimizer"), "train_fraction": ("train", "train_fraction"),
    "train_head": ("train", "train_head"),
    "families": ("effdim", "families"), "n_grid": ("effdim", "n_grid"), "lam": ("effdim", "lambda"),
    "epsilon_scale": ("effdim", "epsilon_scale"), "samples": ("effdim", "samples"),
    "theta_mode": ("effdim", "theta_mode"),
}


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if os.environ.get("QTL_SEED"):
        try:
            cfg["seed"] = int(os.environ["QTL_SEED"])
        except ValueError as exc:
            raise ConfigError(f"QTL_SEED must be an integer: {exc}") from exc
    if getattr(args, "config", None):
        try:
            user = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    for dest, (section, key) in FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is not None:
            cfg[section][key] = value
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _ansatz(cfg: dict) -> AnsatzSpec:
    try:
        return AnsatzSpec.from_dict(cfg["ansatz"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid ansatz settings: {exc}") from exc


def _train_config(cfg: dict, epochs: int | None = None) -> TrainConfig:
    t = dict(cfg["train"])
    if epochs is not None:
        t["epochs"] = epochs
    try:
        return TrainConfig(seed=cfg["seed"], **t)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid training settings: {exc}") from exc


def _comment(cfg: dict) -> str:
    return "# config: " + json.dumps(cfg, sort_keys=True)


def _write(path, lines: list[str]) -> None:
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def metrics_header(classes: int) -> list[str]:
    return ["family", "N", "q", "reupload", "seed", "accuracy"] + [f"f1_{c}" for c in range(classes)]


def metrics_row(spec: AnsatzSpec, seed: int, metrics) -> list:
    return [spec.family.value, spec.layers, spec.qubits, int(spec.reuploading), seed,
            metrics.accuracy] + list(metrics.per_class_f1)


def _fmt(row) -> str:
    return ",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row)


def cmd_gen_data(args) -> int:
    cfg = resolve_config(args)
    d = cfg["data"]
    try:
        ds = gen_synthetic(int(d["n"]), int(d["dim"]), float(d["sigma"]), float(d["separation"]), cfg["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    save_features(ds, args.out, comments=[_comment(cfg)[2:]])
    counts = np.bincount(ds.labels, minlength=ds.class_count)
    print(f"wrote {len(ds)} rows, {ds.feature_dim} features, class counts {counts.tolist()} to {args.out}")
    return EXIT_OK


def _train_from_scratch(cfg: dict, ds: Dataset):
    spec = _ansatz(cfg)
    config = _train_config(cfg)
    model = init_model(spec, ds.class_count, cfg["seed"], input_dim=ds.feature_dim)
    model, train_set, test_set = prepare(model, ds, config)
    model, history = fit(model, train_set, config)
    return model, config, test_set, history


def cmd_train(args) -> int:
    ds = load_features(args.data)
    if args.resume:
        model, record = load_checkpoint(args.resume)
        cfg = record["config"]
        epochs = 0 if args.epochs is None else args.epochs
        if epochs < 0:
            raise ConfigError("epochs must be >= 0 when resuming")
        config = _train_config(cfg, max(epochs, 1))
        train_set, test_set = split_fraction(ds, config.train_fraction, config.seed)
        history = []
        if epochs:
            model, history = fit(model, train_set, config, epochs)
        cfg["train"]["epochs"] = cfg["train"]["epochs"] + epochs
    else:
        cfg = resolve_config(args)
        if ds.class_count < 2:
            raise DataFormatError("need at least two classes")
        model, config, test_set, history = _train_from_scratch(cfg, ds)
    metrics = evaluate(model, test_set)
    metrics.loss_history = history
    if args.checkpoint:
        save_checkpoint(model, args.checkpoint, seed=cfg["seed"], config=cfg, metrics=metrics)
    header = metrics_header(model.class_count)
    row = _fmt(metrics_row(model.spec, cfg["seed"], metrics))
    if args.metrics:
        _write(args.metrics, [_comment(cfg), ",".join(header), row])
    print(",".join(header))
    print(row)
    return EXIT_OK


def cmd_eval(args) -> int:
    model, record = load_checkpoint(args.checkpoint)
    ds = load_features(args.data)
    if ds.feature_dim != model.input_dim:
        raise DataFormatError(f"dataset has {ds.feature_dim} features, checkpoint expects {model.input_dim}")
    if ds.class_count != model.class_count:
        raise DataFormatError(f"dataset has {ds.class_count} classes, checkpoint expects {model.class_count}")
    metrics = evaluate(model, ds)
    cfg = record["config"]
    header = metrics_header(model.class_count)
    row = _fmt(metrics_row(model.spec, record["seed"], metrics))
    if args.metrics:
        _write(args.metrics, [_comment(cfg), ",".join(header), row])
    print(",".join(header))
    print(row)
    return EXIT_OK


SWEEP_HEADER = ["family", "N", "q", "reupload", "theta_mode"] + list(EffDimReport.ROW_FIELDS)


def sweep_configs(cfg: dict) -> list[EffDimConfig]:
    e = cfg["effdim"]
    try:
        return [
            EffDimConfig(int(n), float(e["lambda"]), float(e["epsilon_scale"]) / np.sqrt(int(n)),
                         int(e["samples"]), cfg["seed"])
            for n in e["n_grid"]
        ]
    except ValueError as exc:
        raise ConfigError(f"invalid effective-dimension settings: {exc}") from exc


def run_sweep(cfg: dict, ds: Dataset) -> list[list]:
    """One row per (family, n) grid point, in grid order."""
    configs = sweep_configs(cfg)
    mode = cfg["effdim"]["theta_mode"]
    if mode not in ("fixed", "retrain"):
        raise ConfigError(f"theta_mode must be 'fixed' or 'retrain', got {mode!r}")
    specs = []
    for family in cfg["effdim"]["families"]:
        a = dict(cfg["ansatz"], family=family)
        a.pop("entangler", None)
        specs.append(_ansatz({"ansatz": a}))
    do_train = int(cfg["train"]["epochs"]) > 0
    train_cfg = _train_config(cfg, None if do_train else 1)

    def theta_star(spec, seed):
        model = init_model(spec, ds.class_count, seed, input_dim=ds.feature_dim)
        if not do_train:
            return replace(model, scaler=AngleScaler.fit(ds, *train_cfg.angle_range))
        model, train_set, _ = prepare(model, ds, replace(train_cfg, seed=seed))
        return fit(model, train_set, replace(train_cfg, seed=seed))[0]

    rows = []
    for spec in specs:
        model = theta_star(spec, cfg["seed"])
        for i, ec in enumerate(configs):
            if mode == "retrain" and i > 0:
                model = theta_star(spec, cfg["seed"] + i)
            report = local_effective_dimension(model, ds, ec, theta_mode=mode)
            rows.append([spec.family.value, spec.layers, spec.qubits, int(spec.reuploading), mode] + report.row())
            log.info("%s n=%d effdim=%.4f", spec.family.value, ec.n, report.effective_dimension)
    return rows


def cmd_effdim_sweep(args) -> int:
    cfg = resolve_config(args)
    sweep_configs(cfg)  # reject bad lambda/epsilon before any work
    if args.data:
        ds = load_features(args.data)
        cfg["data"] = {"path": str(args.data)}
    else:
        d = cfg["data"]
        ds = gen_synthetic(int(d["n"]), int(d["dim"]), float(d["sigma"]), float(d["separation"]), cfg["seed"])
    rows = run_sweep(cfg, ds)
    lines = [",".join(SWEEP_HEADER)] + [_fmt(r) for r in rows]
    if args.out:
        _write(args.out, [_comment(cfg)] + lines)
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qtl", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)

    def ansatz_flags(p):
        p.add_argument("--family", choices=["real_amplitudes", "strong_entangling", "single_qubit"])
        p.add_argument("--layers", type=int, help="number of layers N")
        p.add_argument("--qubits", type=int)
        p.add_argument("--reupload", type=_bool, nargs="?", const=True)

    def train_flags(p):
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", type=int)
        p.add_argument("--lr", type=float, help="learning rate for circuit angles")
        p.add_argument("--head-lr", type=float, help="learning rate for the softmax head")
        p.add_argument("--adapter-lr", type=float, help="adapter learning rate (default head lr / input dim)")
        p.add_argument("--optimizer", choices=["adam", "sgd"])
        p.add_argument("--train-fraction", type=float)
        p.add_argument("--train-head", type=_bool, help="false trains the circuit only")

    def data_flags(p):
        p.add_argument("--n", type=int)
        p.add_argument("--dim", type=int)
        p.add_argument("--sigma", type=float)
        p.add_argument("--separation", type=float)

    p = sub.add_parser("gen-data", help="write a synthetic two-class feature file")
    common(p)
    data_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a hybrid model on a feature file")
    common(p)
    ansatz_flags(p)
    train_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", help="write the trained model here")
    p.add_argument("--metrics", help="write the metrics row here")
    p.add_argument("--resume", help="continue from a checkpoint (default 0 extra epochs)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a feature file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--metrics")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("effdim-sweep", help="local effective dimension over a grid of n")
    common(p)
    ansatz_flags(p)
    train_flags(p)
    data_flags(p)
    p.add_argument("--families", type=lambda s: s.split(","))
    p.add_argument("--n-grid", type=_int_list)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--epsilon-scale", type=float, help="epsilon = scale / sqrt(n)")
    p.add_argument("--samples", type=int, help="Monte Carlo samples M")
    p.add_argument("--theta-mode", choices=["fixed", "retrain"])
    p.add_argument("--data", help="feature file (default: synthetic data)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_effdim_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
