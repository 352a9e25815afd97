"""Fitted estimate constants over a range of exponents.

    python3 scripts/lab_sweep.py --p 3 4 5 --samples 1000 --out out/lab_sweep
"""

import argparse
import csv
from pathlib import Path

from hybridnls.config import LabConfig
from hybridnls.runner import lab


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, nargs="+", default=[3.0, 4.0, 5.0])
    ap.add_argument("--s", type=float, default=2.0)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/lab_sweep")
    args = ap.parse_args()
    print(f"{'p':>5}  {'lemma':<24}{'max_ratio':>12}{'q99':>12}  violated")
    for p in args.p:
        cfg = LabConfig(p=p, s=args.s, q=(p + 3) / 2, samples=args.samples, seed=args.seed, n=args.n,
                        output_dir=str(Path(args.out) / f"p{p:g}"))
        for path in lab(cfg).values():
            with open(path) as fh:
                for row in csv.DictReader(fh):
                    print(f"{p:>5g}  {row['lemma']:<24}{float(row['max_ratio']):>12.4g}"
                          f"{float(row['q99']):>12.4g}  {row['violated']}")


if __name__ == "__main__":
    main()
