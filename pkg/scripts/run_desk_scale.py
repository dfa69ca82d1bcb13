"""Desk-scale experiment: base training on 10,000 arrhythmia beats, then diagnostic transfer.

Uses the public release files when --data-dir is given, otherwise the
synthetic surrogates. Besides the frozen-feature transfer it trains the
2-class model from scratch on the same split for comparison, and writes
all numbers to a JSON summary.

    python scripts/run_desk_scale.py --data-dir /path/to/release --out results/desk.json
"""

import argparse
import json
import logging
import time
from pathlib import Path

from ecgbeat.checkpoint import save_checkpoint
from ecgbeat.data import load_release, stratified_split, stratified_subset
from ecgbeat.evaluation import evaluate, report_dict
from ecgbeat.model import build_modified
from ecgbeat.synthetic import mitbih_like, ptb_like
from ecgbeat.train import TrainConfig, train
from ecgbeat.transfer import TransferConfig, transfer_fit


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", type=Path, default=None,
                        help="directory with mitbih_train/test.csv and ptbdb_normal/abnormal.csv")
    parser.add_argument("--subset", type=int, default=10_000, help="arrhythmia beats for base training")
    parser.add_argument("--max-epochs", type=int, default=30)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out", type=Path, default=Path("results/desk_scale.json"))
    parser.add_argument("--skip-scratch", action="store_true", help="skip the from-scratch 2-class run")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    if args.data_dir:
        mitbih, ptb, source = load_release(args.data_dir, "MIT-BIH"), load_release(args.data_dir, "PTB"), "release"
    else:
        mitbih, ptb, source = mitbih_like(2 * args.subset, args.seed), ptb_like(seed=args.seed), "synthetic"
    args.out.parent.mkdir(parents=True, exist_ok=True)
    cfg = TrainConfig(seed=args.seed, max_epochs=args.max_epochs)
    summary = {"data": source, "config": cfg.to_dict()}

    tr, va, te = stratified_split(stratified_subset(mitbih, args.subset, args.seed), seed=args.seed)
    (base, history), wall = timed(train, build_modified(seed=args.seed), tr, va, cfg)
    base_ckpt = args.out.with_name("base.ecgm")
    save_checkpoint(base, base_ckpt)
    summary["base"] = {"wall_seconds": wall, "epochs": len(history), "best_epoch": history.best_epoch,
                       **report_dict(*evaluate(base, te))}

    ptr, pva, pte = stratified_split(ptb, seed=args.seed)
    tcfg = TransferConfig(seed=args.seed, max_epochs=args.max_epochs)
    (moved, history), wall = timed(transfer_fit, base_ckpt, ptr, pva, tcfg)
    save_checkpoint(moved, args.out.with_name("transfer.ecgm"))
    summary["transfer"] = {"wall_seconds": wall, "epochs": len(history),
                           "wall_ratio": wall / summary["base"]["wall_seconds"],
                           **report_dict(*evaluate(moved, pte))}

    if not args.skip_scratch:
        (scratch, history), wall = timed(train, build_modified(n_classes=2, seed=args.seed), ptr, pva, cfg)
        summary["ptb_scratch"] = {"wall_seconds": wall, "epochs": len(history),
                                  **report_dict(*evaluate(scratch, pte))}

    args.out.write_text(json.dumps(summary, indent=2) + "\n")
    for key in ("base", "transfer", "ptb_scratch"):
        if key in summary:
            s = summary[key]
            print(f"{key:12s} acc {s['accuracy']:.4f}  last-class f1 {s['per_class'][-1]['f1']:.4f}  "
                  f"epochs {s['epochs']:2d}  wall {s['wall_seconds']:.1f}s")
    print(f"transfer / base wall time: {summary['transfer']['wall_ratio']:.3f}")


if __name__ == "__main__":
    main()
