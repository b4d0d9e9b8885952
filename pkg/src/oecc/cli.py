"""Command-line front end: one subcommand per pipeline stage.

Every stage writes into an ``--out`` directory: its artifacts plus a
``manifest.json`` that records the effective config, its hash, the seed and
the paths it read and wrote. Later stages find datasets through the
manifest of a ``gen-data`` directory. Outputs are staged in a scratch
directory and moved into place only once the whole command has succeeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import BenchmarkConfig, make_datasets
from .core_nn import load_checkpoint, save_checkpoint
from .data_synth import OOD_FAMILIES, Role, assign_roles, load_dataset, save_dataset
from .detectors.features import layer_features, load_feature_csv, save_feature_csv
from .detectors.gram import StateError, compute_normalizers_features, fit_gram_features, total_deviation_features, validation_partition
from .detectors.mahalanobis import DEFAULT_EPSILONS, MahalanobisDetector, fit_gaussian_stats, fit_logistic, mahalanobis_score
from .detectors.msp import msp_score
from .evaluation import calibration_report, evaluate_gram, evaluate_mahalanobis, evaluate_msp
from .io_utils import config_hash, dumps_json, read_config, read_json, write_csv, write_json
from .metrics import detector_metrics, roc_curve, score_histogram
from .training import TrainConfig, build_model, finetune_oecc, oecc_config, pretrain, tune_lambdas

log = logging.getLogger("oecc")

MANIFEST = "manifest.json"
DATA_FILES = {
    Role.D_IN_TRAIN: "d_in_train.csv",
    Role.D_IN_VAL: "d_in_val.csv",
    Role.D_IN_TEST: "d_in_test.csv",
    Role.D_OUT_OE: "d_out_oe.csv",
    Role.D_OUT_VAL: "d_out_val.csv",
    Role.D_OUT_TEST: "d_out_test.csv",
}
HELDOUT_FILE = "oe_heldout.csv"
FEATURE_FILES = ("train.csv", "in_val.csv", "out_val.csv", "in_test.csv", "out_test.csv")
_BENCH_KEYS = {"dim", "classes", "count", "separation", "scale", "offset", "oe_range", "noise_scale"}
_ROLE_KEYS = {"oe_families": "oe", "val_families": "val", "test_families": "test"}


class CliError(Exception):
    """Bad user input; reported as a one-line diagnostic."""


# ---------------------------------------------------------------- settings

class Settings:
    """Effective benchmark and training config for one invocation."""

    def __init__(self, bench: BenchmarkConfig, train: TrainConfig):
        self.bench = bench
        self.train = train

    @property
    def seed(self) -> int:
        return self.train.seed

    def to_dict(self) -> dict:
        return {"benchmark": self.bench.to_dict(), "train": self.train.to_dict()}

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


def _split_families(value: str) -> tuple[str, ...]:
    fams = tuple(v for v in value.replace(",", " ").split() if v)
    for f in fams:
        if f not in OOD_FAMILIES:
            raise CliError(f"unknown OOD family {f!r}")
    return fams


def settings_from_mapping(raw: dict, seed=None) -> Settings:
    bench_kw, role_kw, train_kw = {}, {}, {}
    defaults = BenchmarkConfig()
    for key, value in raw.items():
        if key in _BENCH_KEYS:
            bench_kw[key] = type(getattr(defaults, key))(value)
        elif key in _ROLE_KEYS:
            role_kw[_ROLE_KEYS[key]] = _split_families(value) if isinstance(value, str) else tuple(value)
        else:
            train_kw[key] = value
    if role_kw:
        base = defaults.roles
        merged = {k: role_kw.get(k, getattr(base, k)) for k in ("oe", "val", "test")}
        bench_kw["roles"] = assign_roles(**merged)
    train = TrainConfig.from_mapping(train_kw)
    if seed is not None:
        train = replace(train, seed=seed)
    return Settings(BenchmarkConfig(**bench_kw), train)


def load_settings(args, overrides: dict | None = None) -> Settings:
    raw = dict(read_config(args.config)) if getattr(args, "config", None) else {}
    raw.update(overrides or {})
    return settings_from_mapping(raw, args.seed)


def _train_overrides(args, epochs_key=None) -> dict:
    out = {}
    for name in ("lambda1", "lambda2"):
        if getattr(args, name, None) is not None:
            out[name] = getattr(args, name)
    if epochs_key and getattr(args, "epochs", None) is not None:
        out[epochs_key] = args.epochs
    return out


# ---------------------------------------------------------------- output staging

class Output:
    """Scratch directory whose files are moved into ``dest`` on commit."""

    def __init__(self, dest: Path):
        self.dest = Path(dest)
        self.dest.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.dest))
        self.files: dict[str, str] = {}

    def path(self, name: str, key: str | None = None) -> Path:
        self.files[key or Path(name).stem] = name
        return self.tmp / name

    def commit(self):
        for name in self.files.values():
            os.replace(self.tmp / name, self.dest / name)
        if (self.tmp / MANIFEST).exists():
            os.replace(self.tmp / MANIFEST, self.dest / MANIFEST)
        shutil.rmtree(self.tmp, ignore_errors=True)

    def abort(self):
        shutil.rmtree(self.tmp, ignore_errors=True)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Output, command: str, settings: Settings, started: str, inputs: dict, **extra) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "seed": settings.seed,
        "config": settings.to_dict(),
        "config_hash": settings.hash,
        "inputs": {k: str(Path(v).resolve()) for k, v in inputs.items()},
        "artifacts": dict(sorted(out.files.items())),
        "started": started,
        "finished": _now(),
    }
    manifest.update(extra)
    write_json(out.tmp / MANIFEST, manifest)


def stamp(payload: dict, settings: Settings) -> dict:
    return {**payload, "config_hash": settings.hash, "seed": settings.seed}


# ---------------------------------------------------------------- inputs

def _read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    if not path.is_file():
        raise CliError(f"no manifest at {path}")
    try:
        return read_json(path)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: corrupt manifest ({exc})") from None


def load_data_dir(data_dir) -> dict:
    data_dir = Path(data_dir)
    manifest = _read_manifest(data_dir)
    if manifest.get("command") != "gen-data":
        raise CliError(f"{data_dir} is not a gen-data output directory")
    out = {}
    for role, fname in DATA_FILES.items():
        path = data_dir / fname
        if not path.is_file():
            raise CliError(f"missing dataset file {path}")
        out[role] = load_dataset(path, role, manifest["families"].get(role.value, ""))
    held = data_dir / HELDOUT_FILE
    if held.is_file():
        out["oe_heldout"] = load_dataset(held, Role.D_OUT_OE, manifest["families"].get("oe_heldout", ""))
    return out


def _load_model(path):
    path = Path(path)
    if not path.is_file():
        raise CliError(f"checkpoint {path} does not exist")
    return load_checkpoint(path)


def _checkpoint_a_tr(path, explicit=None) -> float:
    if explicit is not None:
        return explicit
    manifest = _read_manifest(Path(path).parent)
    if "a_tr" not in manifest:
        raise CliError("the checkpoint's manifest has no a_tr; pass --a-tr")
    return float(manifest["a_tr"])


# ---------------------------------------------------------------- tables

def format_table(rows: list[dict], columns: list[str], percent=True) -> str:
    """Aligned plain-text table; metrics shown in percent like the usual result tables."""
    def cell(v):
        if isinstance(v, float):
            return f"{100 * v:.2f}" if percent else f"{v:.4f}"
        return "-" if v is None else str(v)

    body = [[cell(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(columns, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for b in body:
        lines.append("  ".join(v.ljust(w) if i == 0 else v.rjust(w) for i, (v, w) in enumerate(zip(b, widths))))
    return "\n".join(lines) + "\n"


MSP_COLUMNS = ["method", "fpr95", "auroc", "aupr", "accuracy"]
DETECTOR_COLUMNS = ["method", "tnr95", "auroc", "dacc", "aupr_in", "aupr_out"]


def _emit_table(out: Output, text: str):
    (out.path("table.txt")).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def cmd_gen_data(args) -> None:
    settings = load_settings(args)
    started = _now()
    datasets = make_datasets(settings.seed, settings.bench)
    out = Output(args.out)
    try:
        families = {}
        for role, fname in DATA_FILES.items():
            save_dataset(datasets[role], out.path(fname))
            families[role.value] = datasets[role].family
        save_dataset(datasets["oe_heldout"], out.path(HELDOUT_FILE))
        families["oe_heldout"] = datasets["oe_heldout"].family
        counts = {getattr(r, "value", r): len(d) for r, d in datasets.items()}
        write_manifest(out, "gen-data", settings, started, {}, families=families, counts=counts)
        out.commit()
    except BaseException:
        out.abort()
        raise
    print(f"wrote {len(families)} datasets to {args.out}")


def _write_log(path: Path, history: list[dict]):
    path.write_text("".join(json.dumps(row, sort_keys=True) + "\n" for row in history), encoding="utf-8")


def cmd_pretrain(args) -> None:
    settings = load_settings(args, _train_overrides(args, "pretrain_epochs"))
    started = _now()
    data = load_data_dir(args.data)
    train_ds = data[Role.D_IN_TRAIN]
    k = int(train_ds.labels.max()) + 1
    if k < 2:
        raise CliError("training data has fewer than two classes")
    history: list[dict] = []
    model, a_tr = pretrain(build_model(settings.train, train_ds.dim, k), train_ds, settings.train, history)
    out = Output(args.out)
    try:
        save_checkpoint(model, out.path("model.ckpt", "checkpoint"))
        _write_log(out.path("train_log.jsonl", "train_log"), history)
        write_manifest(out, "pretrain", settings, started, {"data": args.data}, a_tr=a_tr)
        out.commit()
    except BaseException:
        out.abort()
        raise
    print(f"pretrained: a_tr={a_tr:.4f}")


def cmd_finetune(args) -> None:
    settings = load_settings(args, _train_overrides(args, "finetune_epochs"))
    started = _now()
    model = _load_model(args.checkpoint)
    a_tr = _checkpoint_a_tr(args.checkpoint, args.a_tr)
    data = load_data_dir(args.data)
    ocfg = oecc_config(settings.train, a_tr, model.num_classes)
    history: list[dict] = []
    tuned = finetune_oecc(model, data[Role.D_IN_TRAIN], data[Role.D_OUT_OE], settings.train, ocfg, history)
    out = Output(args.out)
    try:
        save_checkpoint(tuned, out.path("model.ckpt", "checkpoint"))
        _write_log(out.path("train_log.jsonl", "train_log"), history)
        write_manifest(out, "finetune", settings, started, {"data": args.data, "checkpoint": args.checkpoint},
                       a_tr=a_tr, lambda1=settings.train.lambda1, lambda2=settings.train.lambda2)
        out.commit()
    except BaseException:
        out.abort()
        raise
    print(f"fine-tuned with lambda1={settings.train.lambda1:g} lambda2={settings.train.lambda2:g}")


def cmd_tune(args) -> None:
    settings = load_settings(args, _train_overrides(args, "finetune_epochs"))
    started = _now()
    model = _load_model(args.checkpoint)
    a_tr = _checkpoint_a_tr(args.checkpoint, args.a_tr)
    data = load_data_dir(args.data)
    l1, l2, report = tune_lambdas(lambda: (model.copy(), a_tr), data, settings.train)
    out = Output(args.out)
    try:
        write_json(out.path("tune.json"), stamp({"lambda1": l1, "lambda2": l2, "cells": report.cells}, settings))
        _emit_table(out, format_table(report.cells, ["lambda1", "lambda2", "fpr95", "auroc"], percent=False)
                    + f"selected lambda1={l1:g} lambda2={l2:g}\n")
        write_manifest(out, "tune", settings, started, {"data": args.data, "checkpoint": args.checkpoint},
                       lambda1=l1, lambda2=l2)
        out.commit()
    except BaseException:
        out.abort()
        raise


def _label(args) -> str:
    return args.label or Path(args.checkpoint).resolve().parent.name


def cmd_eval(args) -> None:
    settings = load_settings(args)
    started = _now()
    model = _load_model(args.checkpoint)
    data = load_data_dir(args.data)
    d_in, d_out = data[Role.D_IN_TEST], data[Role.D_OUT_TEST]
    metrics = evaluate_msp(model, d_in, d_out)
    s_in, s_out = msp_score(model, d_in.features), msp_score(model, d_out.features)
    label = _label(args)
    out = Output(args.out)
    try:
        write_json(out.path("metrics.json"), stamp({"method": label, "detector": "msp", **metrics}, settings))
        fpr, tpr, thr = roc_curve(s_in, s_out, positive="out_dist")
        write_csv(out.path("roc.csv"), ["fpr", "tpr", "threshold"], zip(fpr, tpr, thr))
        lo = 1.0 / model.num_classes
        edges, c_in = score_histogram(s_in, args.bins, lo, 1.0)
        _, c_out = score_histogram(s_out, args.bins, lo, 1.0)
        write_csv(out.path("msp_hist.csv"), ["bin_lo", "bin_hi", "in_count", "out_count"],
                  zip(edges[:-1], edges[1:], c_in.tolist(), c_out.tolist()))
        _emit_table(out, format_table([{"method": label, **metrics}], MSP_COLUMNS))
        write_manifest(out, "eval", settings, started, {"data": args.data, "checkpoint": args.checkpoint},
                       label=label, detector="msp")
        out.commit()
    except BaseException:
        out.abort()
        raise


def _parse_orders(text):
    try:
        orders = tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise CliError(f"bad --orders {text!r}") from None
    if not orders or min(orders) < 1:
        raise CliError("--orders needs positive integers")
    return orders


def _detect_from_features(kind, args, settings):
    paths = [Path(args.features) / f for f in FEATURE_FILES]
    for p in paths:
        if not p.is_file():
            raise CliError(f"missing feature file {p}")
    (train, y), (in_val, _), (out_val, _), (in_test, _), (out_test, _) = (load_feature_csv(p) for p in paths)
    if y is None:
        raise CliError(f"{paths[0]} needs a label column")
    k = int(max(y.max() + 1, train[-1].shape[1]))
    if kind == "md":
        if args.epsilon:
            raise CliError("input preprocessing needs a model; use --checkpoint or --epsilon 0")
        stats = fit_gaussian_stats(train, y, k)
        ens = fit_logistic(mahalanobis_score(stats, in_val), mahalanobis_score(stats, out_val))
        metrics = detector_metrics(ens.score(mahalanobis_score(stats, in_test)), ens.score(mahalanobis_score(stats, out_test)))
        metrics["epsilon"] = 0.0
        return metrics, MahalanobisDetector(stats, ens, 0.0).to_dict()
    sig = fit_gram_features(train, np.argmax(train[-1], axis=1), k, _parse_orders(args.orders))
    val_idx, rest_idx = validation_partition(len(in_test[0]), 0.1, settings.seed)
    sig = compute_normalizers_features(sig, [f[val_idx] for f in in_test])
    metrics = detector_metrics(-total_deviation_features(sig, [f[rest_idx] for f in in_test])[1],
                               -total_deviation_features(sig, out_test)[1])
    return metrics, sig.to_dict()


def cmd_detect(args) -> None:
    settings = load_settings(args)
    started = _now()
    kind = args.detector
    if (args.checkpoint is None) == (args.features is None):
        raise CliError("give exactly one of --checkpoint or --features")
    if args.features is not None:
        metrics, state = _detect_from_features(kind, args, settings)
        inputs = {"features": args.features}
        label = args.label or Path(args.features).resolve().name
    else:
        if args.data is None:
            raise CliError("--checkpoint needs --data")
        model = _load_model(args.checkpoint)
        data = load_data_dir(args.data)
        roles = [data[r] for r in (Role.D_IN_TRAIN, Role.D_IN_VAL, Role.D_OUT_VAL, Role.D_IN_TEST, Role.D_OUT_TEST)]
        if kind == "md":
            eps = DEFAULT_EPSILONS if args.epsilon is None else (args.epsilon,)
            metrics, det = evaluate_mahalanobis(model, *roles, epsilons=eps)
            state = det.to_dict()
        else:
            metrics, sig = evaluate_gram(model, roles[0], roles[3], roles[4], _parse_orders(args.orders), seed=settings.seed)
            state = sig.to_dict()
        inputs = {"data": args.data, "checkpoint": args.checkpoint}
        label = _label(args)
    name = f"{label}+{'MD' if kind == 'md' else 'GM'}"
    out = Output(args.out)
    try:
        write_json(out.path("metrics.json"), stamp({"method": name, "detector": kind, **metrics}, settings))
        write_json(out.path("detector.json"), stamp(state, settings))
        _emit_table(out, format_table([{"method": name, **metrics}], DETECTOR_COLUMNS))
        write_manifest(out, "detect", settings, started, inputs, label=name, detector=kind)
        out.commit()
    except BaseException:
        out.abort()
        raise


def cmd_features(args) -> None:
    settings = load_settings(args)
    started = _now()
    model = _load_model(args.checkpoint)
    data = load_data_dir(args.data)
    sets = (data[Role.D_IN_TRAIN], data[Role.D_IN_VAL], data[Role.D_OUT_VAL], data[Role.D_IN_TEST], data[Role.D_OUT_TEST])
    out = Output(args.out)
    try:
        for fname, ds in zip(FEATURE_FILES, sets):
            labels = ds.labels if ds.role is Role.D_IN_TRAIN else None
            save_feature_csv(out.path(fname), layer_features(model, ds.features), labels)
        write_manifest(out, "features", settings, started, {"data": args.data, "checkpoint": args.checkpoint})
        out.commit()
    except BaseException:
        out.abort()
        raise


def cmd_calibrate(args) -> None:
    settings = load_settings(args)
    started = _now()
    model = _load_model(args.checkpoint)
    data = load_data_dir(args.data)
    summary, bins = calibration_report(model, data[Role.D_IN_TEST], args.bins)
    label = _label(args)
    out = Output(args.out)
    try:
        write_json(out.path("calibration.json"), stamp({"method": label, **summary}, settings))
        write_csv(out.path("reliability.csv"), ["bin_lo", "bin_hi", "count", "accuracy", "confidence"], bins.rows())
        _emit_table(out, format_table([{"method": label, "ece": summary["ece"], "mce": summary["mce"]}],
                                      ["method", "ece", "mce"]))
        write_manifest(out, "calibrate", settings, started, {"data": args.data, "checkpoint": args.checkpoint},
                       label=label)
        out.commit()
    except BaseException:
        out.abort()
        raise


def _manifest_metrics(path) -> tuple[dict, str]:
    path = Path(path)
    base = path if path.is_dir() else path.parent
    manifest = _read_manifest(path)
    arts = manifest.get("artifacts", {})
    key = next((k for k in ("metrics", "calibration") if k in arts), None)
    if key is None:
        raise CliError(f"{base}: manifest of '{manifest.get('command')}' has no metrics to report")
    metrics_path = base / arts[key]
    if not metrics_path.is_file():
        raise CliError(f"missing {metrics_path}")
    return read_json(metrics_path), manifest.get("detector", key)


def cmd_report(args) -> None:
    rows = {"msp": [], "md": [], "gram": [], "calibration": []}
    for path in args.manifests:
        metrics, kind = _manifest_metrics(path)
        rows[kind].append(metrics)
    text = ""
    if rows["msp"]:
        text += format_table(rows["msp"], MSP_COLUMNS) + "\n"
    if rows["md"] or rows["gram"]:
        text += format_table(rows["md"] + rows["gram"], DETECTOR_COLUMNS) + "\n"
    if rows["calibration"]:
        text += format_table(rows["calibration"], ["method", "ece", "mce"]) + "\n"
    merged = {k: v for k, v in rows.items() if v}
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Output(args.out)
    try:
        out.path("report.json").write_text(dumps_json(merged), encoding="utf-8")
        _emit_table(out, text)
        settings = Settings(BenchmarkConfig(), TrainConfig(seed=0 if args.seed is None else args.seed))
        write_manifest(out, "report", settings, _now(), {f"run{i}": p for i, p in enumerate(args.manifests)})
        out.commit()
    except BaseException:
        out.abort()
        raise


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oecc", description="OOD detection pipeline on synthetic data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", required=out_required, help="output directory")
        return p

    def model_inputs(p, data_required=True):
        p.add_argument("--checkpoint", required=data_required, help="model checkpoint")
        p.add_argument("--data", required=data_required, help="gen-data output directory")
        p.add_argument("--label", help="method name used in tables")

    p = common(sub.add_parser("gen-data", help="generate every dataset role"))
    p.set_defaults(func=cmd_gen_data)

    p = common(sub.add_parser("pretrain", help="cross-entropy pretraining"))
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_pretrain)

    for name, func, helptext in (("finetune", cmd_finetune, "fine-tune with the OECC loss"),
                                 ("tune", cmd_tune, "grid search over lambda1, lambda2")):
        p = common(sub.add_parser(name, help=helptext))
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--a-tr", type=float, help="training accuracy (default: from the checkpoint's manifest)")
        p.add_argument("--epochs", type=int)
        if name == "finetune":
            p.add_argument("--lambda1", type=float)
            p.add_argument("--lambda2", type=float)
        p.set_defaults(func=func)

    p = common(sub.add_parser("eval", help="MSP detection metrics and plot data"))
    model_inputs(p)
    p.add_argument("--bins", type=int, default=20, help="histogram bins for MSP plot data")
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("detect", help="Mahalanobis or Gram detector"))
    p.add_argument("detector", choices=("md", "gram"))
    model_inputs(p, data_required=False)
    p.add_argument("--features", help="directory of feature CSVs instead of a checkpoint")
    p.add_argument("--epsilon", type=float, help="MD input-preprocessing magnitude (default: chosen on validation)")
    p.add_argument("--orders", default="1,2,3,4", help="Gram orders, comma separated")
    p.set_defaults(func=cmd_detect)

    p = common(sub.add_parser("features", help="export per-layer features as CSV"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_features)

    p = common(sub.add_parser("calibrate", help="ECE/MCE and reliability bins"))
    model_inputs(p)
    p.add_argument("--bins", type=int, default=15)
    p.set_defaults(func=cmd_calibrate)

    p = common(sub.add_parser("report", help="merge result manifests into one table"), out_required=False)
    p.add_argument("manifests", nargs="+", help="run directories or manifest files")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (CliError, ValueError, OSError, KeyError, FloatingPointError, StateError) as exc:
        print(f"oecc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
