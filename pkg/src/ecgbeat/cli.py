"""Command-line entry point: ``ecgbeat <command> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 checkpoint error,
4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data, evaluation
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import EcgError
from .model import DEFAULT_INPUT_LENGTH, build, default_label_names
from .train import EarlyStopConfig, PlateauConfig, TrainConfig, train
from .transfer import TransferConfig, transfer_fit

log = logging.getLogger("ecgbeat")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _ratios(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _add_data_flags(p):
    p.add_argument("--length", type=int, default=DEFAULT_INPUT_LENGTH, help="samples per beat")
    p.add_argument("--no-strict", dest="strict", action="store_false",
                   help="clamp samples outside [0, 1] instead of rejecting them")


def _add_train_flags(p):
    d = TrainConfig()
    p.add_argument("--train", required=True, type=Path, help="training CSV")
    p.add_argument("--val", required=True, type=Path, help="validation CSV")
    p.add_argument("--out", required=True, type=Path, help="output checkpoint")
    p.add_argument("--history", type=Path, default=None,
                   help="epoch history JSON-lines file (default: <out>.history.jsonl)")
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--lr", type=float, default=d.learning_rate, help="initial learning rate")
    p.add_argument("--max-epochs", type=int, default=d.max_epochs)
    p.add_argument("--patience", type=int, default=d.early_stop.patience,
                   help="early-stop patience on validation accuracy")
    p.add_argument("--plateau-patience", type=int, default=d.plateau.patience)
    p.add_argument("--plateau-factor", type=float, default=d.plateau.factor)
    p.add_argument("--min-lr", type=float, default=d.plateau.min_lr)
    _add_data_flags(p)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="ecgbeat", description="Heartbeat classifier training and benchmarking.",
                     formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every epoch")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("split", help="stratified train/val/test split of a beat CSV", formatter_class=fmt)
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--ratios", type=_ratios, default=(0.6, 0.2, 0.2), help="train,val,test")
    _add_data_flags(p)

    p = sub.add_parser("train", help="train a model from scratch", formatter_class=fmt)
    p.add_argument("--arch", choices=("modified", "original"), default="modified")
    p.add_argument("--classes", type=int, default=5)
    _add_train_flags(p)

    p = sub.add_parser("transfer", help="swap a 5-class model's head to 2 classes and refit",
                       formatter_class=fmt)
    p.add_argument("--base", required=True, type=Path, help="5-class base checkpoint")
    p.add_argument("--unfreeze", action="store_true", help="fine-tune the feature extractor too")
    _add_train_flags(p)

    p = sub.add_parser("eval", help="confusion matrix and per-class metrics", formatter_class=fmt)
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--test", required=True, type=Path)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--report", type=Path, default=None, help="write a JSON report here")
    _add_data_flags(p)

    p = sub.add_parser("bench", help="batched inference throughput", formatter_class=fmt)
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--test", required=True, type=Path)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--report", type=Path, default=None)
    _add_data_flags(p)

    p = sub.add_parser("replay", help="fixed-rate single-beat stream latency", formatter_class=fmt)
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--rate", type=float, default=500.0, help="beats per second")
    p.add_argument("--limit", type=int, default=None, help="replay only the first N beats")
    p.add_argument("--report", type=Path, default=None)
    _add_data_flags(p)

    p = sub.add_parser("inspect", help="print a checkpoint's architecture summary", formatter_class=fmt)
    p.add_argument("model", type=Path)
    return parser


def _echo_config(args) -> None:
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    print("config " + json.dumps(resolved, sort_keys=True), file=sys.stderr)


def _train_config(args, cls=TrainConfig, **extra):
    return cls(
        batch_size=args.batch_size,
        learning_rate=args.lr,
        max_epochs=args.max_epochs,
        seed=args.seed,
        early_stop=EarlyStopConfig(patience=args.patience),
        plateau=PlateauConfig(patience=args.plateau_patience, factor=args.plateau_factor,
                              min_lr=args.min_lr),
        **extra,
    )


def _history_path(args) -> Path:
    return args.history or args.out.with_name(args.out.name + ".history.jsonl")


def _load(path, args, label_names):
    return data.load_beats_csv(path, args.length, args.strict, label_names)


def _summary(history) -> str:
    best = history.epochs[history.best_epoch - 1]
    return (f"epochs {len(history)} (best {history.best_epoch}), val_acc {best.val_acc:.4f}, "
            f"wall {history.wall_seconds:.1f}s")


def cmd_split(args) -> None:
    ds = data.load_beats_csv(args.input, args.length, args.strict)
    parts = data.stratified_split(ds, args.ratios, args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    names = ("train", "val", "test") if len(parts) == 3 else tuple(f"part{i}" for i in range(len(parts)))
    for name, part in zip(names, parts):
        data.save_beats_csv(part, args.out_dir / f"{name}.csv")
        print(f"{name}: {len(part)} beats {data.class_distribution(part)}")


def cmd_train(args) -> None:
    labels = default_label_names(args.classes)
    tr = _load(args.train, args, labels)
    va = _load(args.val, args, labels)
    model = build(args.arch, args.length, args.classes, seed=args.seed)
    model, history = train(model, tr, va, _train_config(args), history_path=_history_path(args))
    save_checkpoint(model, args.out)
    print(f"{args.arch}: {_summary(history)} -> {args.out}")


def cmd_transfer(args) -> None:
    cfg = _train_config(args, TransferConfig, freeze_features=not args.unfreeze)
    labels = default_label_names(cfg.target_classes)
    tr = _load(args.train, args, labels)
    va = _load(args.val, args, labels)
    model, history = transfer_fit(args.base, tr, va, cfg, history_path=_history_path(args))
    save_checkpoint(model, args.out)
    mode = "full fine-tune" if args.unfreeze else "frozen features"
    print(f"transfer ({mode}): {_summary(history)} -> {args.out}")


def cmd_eval(args) -> None:
    model = load_checkpoint(args.model)
    test = _load(args.test, args, model.label_names)
    cm, metrics = evaluation.evaluate(model, test, args.batch)
    print(metrics.table(model.label_names))
    print("confusion matrix (rows true, columns predicted):")
    for row in cm.counts.tolist():
        print("  " + " ".join(f"{v:7d}" for v in row))
    if args.report:
        evaluation.write_report(args.report, cm, metrics)


def cmd_bench(args) -> None:
    model = load_checkpoint(args.model)
    test = _load(args.test, args, model.label_names)
    report, preds = evaluation.bench_throughput(model, test, args.batch, args.repeat,
                                                return_predictions=True)
    print(f"{model.name}: {report.samples_per_second:.0f} beats/s "
          f"({report.samples} beats x {report.repeats} repeats, batch {report.batch_size})")
    if args.report:
        cm = evaluation.ConfusionMatrix.from_pairs(test.y, preds, model.n_classes, model.label_names)
        evaluation.write_report(args.report, cm, evaluation.ClassMetrics.from_confusion(cm),
                                throughput=report)


def cmd_replay(args) -> None:
    model = load_checkpoint(args.model)
    beats = _load(args.input, args, model.label_names)
    x = beats.x if args.limit is None else beats.x[: args.limit]
    rep = evaluation.replay_stream(model, x, args.rate)
    print(f"{rep.beats} beats at {args.rate:g}/s: p50 {rep.p50_ms:.3f} ms, p95 {rep.p95_ms:.3f} ms, "
          f"p99 {rep.p99_ms:.3f} ms, max {rep.max_ms:.3f} ms, achieved {rep.achieved_rate:.1f}/s")
    if args.report:
        args.report.write_text(json.dumps({"latency": rep.to_dict()}, indent=2) + "\n")


def cmd_inspect(args) -> None:
    model = load_checkpoint(args.model)
    spec = model.spec
    print(f"arch: {spec.name}")
    print(f"conv layers: {spec.conv_count}")
    print(f"block filters: {', '.join(map(str, spec.block_filters))}")
    print(f"input length: {spec.input_length}")
    print(f"parameters: {model.param_count()}")
    print(f"labels: {', '.join(spec.label_names)}")


COMMANDS = {
    "split": cmd_split, "train": cmd_train, "transfer": cmd_transfer, "eval": cmd_eval,
    "bench": cmd_bench, "replay": cmd_replay, "inspect": cmd_inspect,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    _echo_config(args)
    try:
        COMMANDS[args.command](args)
    except EcgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(dispatch())
