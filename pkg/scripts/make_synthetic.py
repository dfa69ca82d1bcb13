"""Write synthetic MIT-BIH-like and PTB-like beat CSVs for trying the pipeline without the real files.

    python scripts/make_synthetic.py --out-dir data/synthetic --mitbih 20000 --ptb 14552
"""

import argparse
from pathlib import Path

from ecgbeat.data import class_distribution, save_beats_csv
from ecgbeat.synthetic import mitbih_like, ptb_like


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", type=Path, default=Path("data/synthetic"))
    parser.add_argument("--mitbih", type=int, default=20_000, help="MIT-BIH-like beats")
    parser.add_argument("--ptb", type=int, default=14_552, help="PTB-like beats")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, ds in (("mitbih.csv", mitbih_like(args.mitbih, args.seed)),
                     ("ptb.csv", ptb_like(args.ptb, args.seed))):
        save_beats_csv(ds, args.out_dir / name)
        print(f"{args.out_dir / name}: {len(ds)} beats {class_distribution(ds)}")


if __name__ == "__main__":
    main()
