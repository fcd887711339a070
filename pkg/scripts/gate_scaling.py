"""Gate counts of the cost unitary against lattice dimension, with log-log fits.

    python3 scripts/gate_scaling.py --n-max 10 --out runs/gates.csv
"""

import argparse
import csv

import numpy as np

from kdsp.cli import gate_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--m", type=int, default=1)
    ap.add_argument("--n-max", type=int, default=10)
    ap.add_argument("--out", default="gates.csv")
    args = ap.parse_args()

    rows = gate_sweep(args.k, args.m, args.n_max)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n_dim", "basis", "one_qubit", "two_qubit", "terms"])
        w.writerows(rows)

    ns = sorted({r[0] for r in rows})
    for label in ("good", "bad"):
        for idx, name in ((2, "one-qubit"), (3, "two-qubit")):
            counts = [next(r[idx] for r in rows if r[0] == n and r[1] == label) for n in ns]
            slope, _ = np.polyfit(np.log(ns), np.log(counts), 1)
            print(f"{label:4s} {name:9s} ~ N^{slope:.2f}   (N={ns[-1]}: {counts[-1]})")


if __name__ == "__main__":
    main()
