"""Command-line driver for the full pipeline.

Subcommands:

* ``synth``       generate a synthetic labeled binary dataset
* ``preprocess``  normalize rows and binarize against a threshold fraction
* ``train``       fit one RBM per class plus soft-max offsets
* ``evaluate``    score a trained ensemble on a labeled test CSV
* ``sweep-alpha`` run preprocess/split/train/evaluate across alpha values

Every option can also come from a ``--config`` key=value file; explicit
flags win over the file, the file wins over built-in defaults. Commands
that write files also write a ``<output>.manifest`` recording the exact
command, effective configuration, input digests, and outputs. Manifests
carry a timestamp; all data outputs themselves are byte-deterministic
given the same inputs and seeds.

Exit codes: 0 success, 2 usage or validation problems, 3 i/o failures,
4 convergence failures.
"""

from __future__ import annotations

import argparse
import hashlib
import re
import shlex
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import (
    OffsetFitConfig,
    load_ensemble,
    predict_label_batch,
    save_ensemble,
    train_ensemble,
)
from .dataset import LabeledDataset, SplitSpec, SynthSpec, load_csv, save_csv, split, synth_generate
from .errors import ConvergenceError, FormatError, ValidationError
from .metrics import evaluate
from .preprocess import BinarizationRule, Scope, binarize, minmax, normalize_rows
from .rbm import TrainConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_CONVERGENCE = 4

# Threshold fractions swept by default, lowest to highest.
DEFAULT_ALPHA_GRID = ("1/5", "1/4", "1/3", "2/5", "1/2", "3/5", "2/3", "3/4", "4/5")

_SCOPE_CHOICES = {"per-class": Scope.PER_MATRIX, "global": Scope.GLOBAL}

_TRAIN_DEFAULTS = {
    "learning_rate": 0.1,
    "momentum": 0.5,
    "epochs": 50,
    "hidden_units": 100,
    "weight_decay": 2e-4,
    "init_weight_scale": 1.0,
    "seed": 0,
    "fit_learning_rate": 1.0,
    "fit_iterations": 1000,
    "fit_tolerance": 1e-8,
    "label_column": "label",
}

_SYNTH_DEFAULTS = {
    "classes": 2,
    "per_class": 200,
    "dim": 100,
    "separation": 1.0,
    "noise": 0.05,
    "seed": 0,
}

_PREPROCESS_DEFAULTS = {
    "alpha": "1/2",
    "scope": "per-class",
    "label_column": "label",
}

_SWEEP_DEFAULTS = {
    **_TRAIN_DEFAULTS,
    "alphas": ",".join(DEFAULT_ALPHA_GRID),
    "scope": "per-class",
    "train_fraction": 0.5,
    "split_seed": 0,
}


def _parse_alpha(token):
    """Threshold fraction from a decimal or a/b fraction token."""
    token = str(token).strip()
    try:
        if "/" in token:
            num, _, den = token.partition("/")
            return float(num) / float(den)
        return float(token)
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"cannot parse threshold fraction {token!r}") from None


def _parse_scope(name):
    if name not in _SCOPE_CHOICES:
        raise ValidationError(f"scope must be one of {sorted(_SCOPE_CHOICES)}, got {name!r}")
    return _SCOPE_CHOICES[name]


def _read_kv_file(path):
    """Flat key=value file; blank lines and # comments ignored."""
    pairs = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}: line {line_no}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            pairs[key.strip()] = value.strip()
    return pairs


class _Options:
    """Flag > config file > default resolution, remembering what was used."""

    def __init__(self, args, defaults):
        self._args = args
        self._defaults = defaults
        config_path = getattr(args, "config", None)
        self._file = _read_kv_file(config_path) if config_path else {}
        self.effective = {}

    def get(self, name, cast):
        flag = getattr(self._args, name, None)
        if flag is not None:
            value = flag if cast is None else cast(flag)
        elif name in self._file:
            value = cast(self._file[name]) if cast else self._file[name]
        else:
            value = self._defaults[name]
        self.effective[name] = value
        return value


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Scope):
        return value.value
    return str(value)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(path, command, argv, effective, inputs, outputs, notes=()):
    lines = [
        "manifest_version=1",
        f"tool=spectral-rbm {__version__}",
        f"command={command}",
        f"argv={shlex.join(argv)}",
        f"timestamp_utc={datetime.now(timezone.utc).isoformat()}",
    ]
    lines.extend(f"config.{key}={_fmt(effective[key])}" for key in sorted(effective))
    for name, input_path in inputs:
        lines.append(f"input.{name}.path={input_path}")
        lines.append(f"input.{name}.sha256={_sha256(input_path)}")
    lines.extend(f"output.{name}={output_path}" for name, output_path in outputs)
    lines.extend(notes)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _require_binary_features(ds, source):
    if ds.features.size and not np.all((ds.features == 0.0) | (ds.features == 1.0)):
        raise ValidationError(
            f"{source}: features are not all 0/1; run `spectral-rbm preprocess` first"
        )


def _train_config_from(opts):
    return TrainConfig(
        learning_rate=opts.get("learning_rate", float),
        momentum=opts.get("momentum", float),
        epochs=opts.get("epochs", int),
        hidden_units=opts.get("hidden_units", int),
        weight_decay=opts.get("weight_decay", float),
        seed=opts.get("seed", int),
        init_weight_scale=opts.get("init_weight_scale", float),
    )


def _fit_config_from(opts):
    return OffsetFitConfig(
        learning_rate=opts.get("fit_learning_rate", float),
        iterations=opts.get("fit_iterations", int),
        tolerance=opts.get("fit_tolerance", float),
    )


def _binarize_dataset(normalized, labels, rule, class_ids):
    """Binarized matrix plus the statistics actually used, keyed for the sidecar."""
    pooled_lo, pooled_hi = minmax(normalized)
    stats = [("min", pooled_lo), ("max", pooled_hi)]
    if rule.scope is Scope.PER_MATRIX:
        binary = np.empty_like(normalized)
        for c in class_ids:
            idx = labels == c
            lo, hi = minmax(normalized[idx])
            binary[idx] = binarize(normalized[idx], rule, lo, hi)
            stats.append((f"class.{c}.min", lo))
            stats.append((f"class.{c}.max", hi))
    else:
        binary = binarize(normalized, rule, pooled_lo, pooled_hi)
    return binary, stats


# --- subcommands ------------------------------------------------------------


def _cmd_synth(args, argv):
    opts = _Options(args, _SYNTH_DEFAULTS)
    spec = SynthSpec(
        classes=opts.get("classes", int),
        samples_per_class=opts.get("per_class", int),
        dim=opts.get("dim", int),
        separation=opts.get("separation", float),
        noise=opts.get("noise", float),
        seed=opts.get("seed", int),
    )
    ds = synth_generate(spec)
    save_csv(ds, args.out)
    _write_manifest(
        f"{args.out}.manifest", "synth", argv, opts.effective,
        inputs=[], outputs=[("dataset", args.out)],
    )
    print(f"wrote {ds.sample_count} rows x {ds.dim} features to {args.out}")
    return EXIT_OK


def _cmd_preprocess(args, argv):
    opts = _Options(args, _PREPROCESS_DEFAULTS)
    label_column = opts.get("label_column", str)
    ds = load_csv(args.input, label_column)
    if ds.sample_count == 0:
        raise ValidationError(f"{args.input}: no data rows to preprocess")
    normalized = normalize_rows(ds.features)

    if args.reuse_stats:
        if args.alpha is not None or args.scope is not None:
            raise ValidationError("--alpha/--scope come from the sidecar when --reuse-stats is given")
        stats = _read_kv_file(args.reuse_stats)
        for key in ("sidecar_version", "alpha", "min", "max"):
            if key not in stats:
                raise FormatError(f"{args.reuse_stats}: missing sidecar key {key!r}")
        alpha = float(stats["alpha"])
        lo, hi = float(stats["min"]), float(stats["max"])
        # test-time convention: pooled training statistics, whatever scope
        # produced them, applied globally to the new data
        rule = BinarizationRule(alpha, Scope.GLOBAL)
        binary = binarize(normalized, rule, lo, hi)
        save_csv(LabeledDataset(binary, ds.labels, ds.feature_names), args.out, label_column)
        opts.effective.update({"alpha": alpha, "min": lo, "max": hi})
        _write_manifest(
            f"{args.out}.manifest", "preprocess", argv, opts.effective,
            inputs=[("dataset", args.input), ("sidecar", args.reuse_stats)],
            outputs=[("dataset", args.out)],
            notes=("note.binarization=reused pooled training statistics from sidecar",),
        )
        print(f"binarized {ds.sample_count} rows using stored statistics -> {args.out}")
        return EXIT_OK

    alpha = _parse_alpha(opts.get("alpha", None))
    scope_token = opts.get("scope", str)
    scope = _parse_scope(scope_token)
    rule = BinarizationRule(alpha, scope)
    binary, stats = _binarize_dataset(normalized, ds.labels, rule, ds.class_ids())
    save_csv(LabeledDataset(binary, ds.labels, ds.feature_names), args.out, label_column)

    sidecar_path = args.sidecar or f"{args.out}.sidecar"
    sidecar_lines = [
        "sidecar_version=1",
        f"alpha={alpha!r}",
        f"scope={scope_token}",
        "test_time_stats=pooled-train-minmax",
    ]
    sidecar_lines.extend(f"{key}={value!r}" for key, value in stats)
    Path(sidecar_path).write_text("\n".join(sidecar_lines) + "\n", encoding="utf-8")

    opts.effective["alpha"] = alpha
    _write_manifest(
        f"{args.out}.manifest", "preprocess", argv, opts.effective,
        inputs=[("dataset", args.input)],
        outputs=[("dataset", args.out), ("sidecar", sidecar_path)],
        notes=("note.test_time_binarization=apply the sidecar's pooled min/max via --reuse-stats",),
    )
    print(f"binarized {ds.sample_count} rows (alpha={alpha:g}, scope={scope_token}) -> {args.out}")
    return EXIT_OK


def _cmd_train(args, argv):
    opts = _Options(args, _TRAIN_DEFAULTS)
    label_column = opts.get("label_column", str)
    ds = load_csv(args.input, label_column)
    _require_binary_features(ds, args.input)
    config = _train_config_from(opts)
    fit = _fit_config_from(opts)
    ensemble = train_ensemble(ds.class_matrices(), config, fit)
    save_ensemble(args.out, ensemble)
    _write_manifest(
        f"{args.out}.manifest", "train", argv, opts.effective,
        inputs=[("dataset", args.input)],
        outputs=[("model", args.out)],
    )
    print(
        f"trained {len(ensemble.classes)} class models "
        f"({ensemble.num_visible} visible x {config.hidden_units} hidden, "
        f"{config.epochs} epochs) -> {args.out}"
    )
    return EXIT_OK


def _cmd_evaluate(args, argv):
    opts = _Options(args, {"label_column": "label"})
    label_column = opts.get("label_column", str)
    ensemble = load_ensemble(args.model)
    ds = load_csv(args.test, label_column)
    if ds.sample_count == 0:
        raise ValidationError(f"{args.test}: no data rows to evaluate")
    _require_binary_features(ds, args.test)
    if ds.dim != ensemble.num_visible:
        raise ValidationError(
            f"model expects {ensemble.num_visible} features, {args.test} has {ds.dim}"
        )
    predictions = predict_label_batch(ds.features, ensemble)
    report = evaluate(predictions, ds.labels)
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(
            "\n".join(f"{key}={value}" for key, value in report.to_flat()) + "\n",
            encoding="utf-8",
        )
        _write_manifest(
            f"{args.out}.manifest", "evaluate", argv, opts.effective,
            inputs=[("model", args.model), ("dataset", args.test)],
            outputs=[("report", args.out)],
        )
    return EXIT_OK


def _cmd_sweep_alpha(args, argv):
    opts = _Options(args, _SWEEP_DEFAULTS)
    label_column = opts.get("label_column", str)
    ds = load_csv(args.input, label_column)
    if ds.sample_count == 0:
        raise ValidationError(f"{args.input}: no data rows to sweep")
    normalized = normalize_rows(ds.features)
    tokens = [t for t in re.split(r"[,\s]+", opts.get("alphas", str)) if t]
    if not tokens:
        raise ValidationError("no alpha values to sweep")
    scope = _parse_scope(opts.get("scope", str))
    config = _train_config_from(opts)
    fit = _fit_config_from(opts)
    split_spec = SplitSpec(
        train_fraction=opts.get("train_fraction", float),
        seed=opts.get("split_seed", int),
        stratified=True,
    )
    class_ids = ds.class_ids()

    results = []
    for token in tokens:
        rule = BinarizationRule(_parse_alpha(token), scope)
        binary, _ = _binarize_dataset(normalized, ds.labels, rule, class_ids)
        binary_ds = LabeledDataset(binary, ds.labels, ds.feature_names)
        train_ds, test_ds = split(binary_ds, split_spec)
        ensemble = train_ensemble(train_ds.class_matrices(), config, fit)
        predictions = predict_label_batch(test_ds.features, ensemble)
        report = evaluate(predictions, test_ds.labels)
        recalls = [
            report.recall_for(c) if c in report.classes else float("nan") for c in class_ids
        ]
        results.append((token, report.accuracy, recalls))

    table = _format_sweep_table(class_ids, results)
    print(table)
    if args.out:
        Path(args.out).write_text(table + "\n", encoding="utf-8")
        _write_manifest(
            f"{args.out}.manifest", "sweep-alpha", argv, opts.effective,
            inputs=[("dataset", args.input)],
            outputs=[("table", args.out)],
        )
    return EXIT_OK


def _format_sweep_table(class_ids, results):
    headers = ["alpha", "accuracy"] + [f"recall[{c}]" for c in class_ids]
    body = []
    for token, accuracy, recalls in results:
        cells = [token, f"{accuracy:.6f}"]
        cells.extend("undefined" if np.isnan(r) else f"{r:.6f}" for r in recalls)
        body.append(cells)
    widths = [max(len(h), *(len(row[i]) for row in body)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    for row in body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


# --- parser -----------------------------------------------------------------


def _add_train_options(sp):
    sp.add_argument("--learning-rate", "--lr", dest="learning_rate", type=float,
                    help="CD-1 step size")
    sp.add_argument("--momentum", type=float, help="velocity carry-over in [0, 1)")
    sp.add_argument("--epochs", type=int, help="full passes over each class's rows")
    sp.add_argument("--hidden-units", "--hidden", dest="hidden_units", type=int,
                    help="hidden layer size")
    sp.add_argument("--weight-decay", dest="weight_decay", type=float, help="L2 penalty on weights")
    sp.add_argument("--init-weight-scale", dest="init_weight_scale", type=float,
                    help="multiplier on the standard-normal weight init")
    sp.add_argument("--seed", type=int, help="ensemble seed; per-class seeds derive from it")
    sp.add_argument("--fit-learning-rate", dest="fit_learning_rate", type=float,
                    help="offset fit step size")
    sp.add_argument("--fit-iterations", dest="fit_iterations", type=int,
                    help="offset fit iteration budget")
    sp.add_argument("--fit-tolerance", dest="fit_tolerance", type=float,
                    help="offset fit gradient tolerance")
    sp.add_argument("--label-column", dest="label_column", help="name of the label column")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spectral-rbm",
        description="Per-class binary RBMs with a free-energy soft-max readout.",
        epilog="exit codes: 0 success, 2 usage/validation, 3 i/o, 4 convergence",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file supplying option values (flags win)")

    synth = sub.add_parser("synth", parents=[common],
                           help="generate a synthetic labeled binary dataset")
    synth.add_argument("--out", required=True, help="output CSV path")
    synth.add_argument("--classes", type=int, help="number of classes (default 2)")
    synth.add_argument("--per-class", dest="per_class", type=int,
                       help="samples per class (default 200)")
    synth.add_argument("--dim", type=int, help="feature dimensions (default 100)")
    synth.add_argument("--separation", type=float,
                       help="fraction of dimensions carrying class signal (default 1.0)")
    synth.add_argument("--noise", type=float, help="per-bit flip probability (default 0.05)")
    synth.add_argument("--seed", type=int, help="generator seed (default 0)")
    synth.set_defaults(func=_cmd_synth)

    pre = sub.add_parser("preprocess", parents=[common],
                         help="l2-normalize rows and binarize features")
    pre.add_argument("input", help="labeled CSV of raw features")
    pre.add_argument("--out", required=True, help="output CSV path")
    pre.add_argument("--alpha", help="threshold fraction in (0, 1), decimal or a/b (default 1/2)")
    pre.add_argument("--scope", choices=sorted(_SCOPE_CHOICES),
                     help="matrix the min/max statistics are taken over (default per-class)")
    pre.add_argument("--sidecar", help="where to write the statistics sidecar "
                                       "(default <out>.sidecar)")
    pre.add_argument("--reuse-stats", dest="reuse_stats",
                     help="binarize with pooled statistics from an existing sidecar "
                          "instead of computing new ones (test-time mode)")
    pre.add_argument("--label-column", dest="label_column", help="name of the label column")
    pre.set_defaults(func=_cmd_preprocess)

    train = sub.add_parser("train", parents=[common],
                           help="train one RBM per class plus soft-max offsets")
    train.add_argument("input", help="labeled CSV of binarized features")
    train.add_argument("--out", required=True, help="output model path")
    _add_train_options(train)
    train.set_defaults(func=_cmd_train)

    ev = sub.add_parser("evaluate", parents=[common],
                        help="evaluate a trained ensemble on labeled binary data")
    ev.add_argument("model", help="RBME1 model file from `train`")
    ev.add_argument("test", help="labeled CSV of binarized test features")
    ev.add_argument("--out", help="also write a machine-readable report here")
    ev.add_argument("--label-column", dest="label_column", help="name of the label column")
    ev.set_defaults(func=_cmd_evaluate)

    sweep = sub.add_parser("sweep-alpha", parents=[common],
                           help="binarize, split, train, evaluate across alpha values")
    sweep.add_argument("input", help="labeled CSV of raw features")
    sweep.add_argument("--alphas", help="comma/space separated threshold fractions "
                                        f"(default {','.join(DEFAULT_ALPHA_GRID)})")
    sweep.add_argument("--scope", choices=sorted(_SCOPE_CHOICES),
                       help="binarization statistics scope (default per-class)")
    sweep.add_argument("--train-fraction", dest="train_fraction", type=float,
                       help="fraction of each class sent to train (default 0.5)")
    sweep.add_argument("--split-seed", dest="split_seed", type=int,
                       help="seed for the stratified split (default 0)")
    sweep.add_argument("--out", help="also write the result table here")
    _add_train_options(sweep)
    sweep.set_defaults(func=_cmd_sweep_alpha)

    return parser


def main(argv=None):
    """Run the CLI; returns the process exit code instead of raising."""
    if argv is None:
        argv = sys.argv[1:]
    argv = list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits for --help/--version/usage errors
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args, argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry_point():
    raise SystemExit(main())


if __name__ == "__main__":
    entry_point()
