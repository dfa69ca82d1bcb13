"""Throughput of the 11-conv and 6-conv networks on one harness, plus stream-replay latency.

Weights do not affect inference cost, so freshly built models are used
unless checkpoints are given.

    python scripts/bench_compare.py --beats 4000 --rate 500
"""

import argparse
import json

from ecgbeat.checkpoint import load_checkpoint
from ecgbeat.data import load_beats_csv
from ecgbeat.evaluation import bench_throughput, replay_stream
from ecgbeat.model import build_modified, build_original
from ecgbeat.synthetic import mitbih_like


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--test", default=None, help="beat CSV to classify (default: synthetic beats)")
    parser.add_argument("--beats", type=int, default=4000, help="synthetic beats when --test is absent")
    parser.add_argument("--modified", default=None, help="modified-model checkpoint")
    parser.add_argument("--original", default=None, help="original-model checkpoint")
    parser.add_argument("--batch", type=int, default=128)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--rate", type=float, default=500.0, help="replay rate, beats per second")
    parser.add_argument("--replay-beats", type=int, default=1000)
    parser.add_argument("--out", default=None, help="write a JSON summary here")
    args = parser.parse_args()

    data = load_beats_csv(args.test) if args.test else mitbih_like(args.beats, seed=0)
    modified = load_checkpoint(args.modified) if args.modified else build_modified()
    original = load_checkpoint(args.original) if args.original else build_original()

    out = {}
    for name, model in (("modified", modified), ("original", original)):
        rep = bench_throughput(model, data, args.batch, args.repeat)
        out[name] = rep.to_dict()
        print(f"{name:9s} {rep.samples_per_second:8.0f} beats/s")
    out["ratio"] = out["modified"]["samples_per_second"] / out["original"]["samples_per_second"]
    print(f"modified / original throughput: {out['ratio']:.2f}")

    lat = replay_stream(modified, data.x[: args.replay_beats], args.rate)
    out["replay"] = lat.to_dict()
    print(f"replay {lat.beats} beats at {args.rate:g}/s: p50 {lat.p50_ms:.2f} ms, p99 {lat.p99_ms:.2f} ms, "
          f"max {lat.max_ms:.2f} ms, achieved {lat.achieved_rate:.1f}/s")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=2)


if __name__ == "__main__":
    main()
