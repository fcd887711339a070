"""Train QAOA at several depths on the identity and scrambled bases and tabulate.

Writes ``prob_table.csv`` under --out with the trained energy, the sampled
energy and P(vol^2 <= t) for each (basis, p).

    python3 scripts/run_prob_table.py --out runs/table --p 0 1 3 5
"""

import argparse
import csv
from pathlib import Path

from kdsp.hamiltonian import EncodingConfig, diagonal_vector
from kdsp.instances import identity_basis, scrambled_basis
from kdsp.lattice import gram
from kdsp.qaoa import QaoaParams, optimize_params, sample_report

THRESHOLDS = (5, 10, 20)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/table")
    ap.add_argument("--p", type=int, nargs="+", default=[0, 1, 3, 5])
    ap.add_argument("--epochs", type=int, default=1000)
    ap.add_argument("--restarts", type=int, default=4)
    ap.add_argument("--shots", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = EncodingConfig(2, 3, 1)
    bases = {"good": identity_basis(3), "bad": scrambled_basis(identity_basis(3))}
    rows = []
    for label, basis in bases.items():
        diag = diagonal_vector(gram(basis), cfg)
        for p in args.p:
            if p == 0:
                params, energy = QaoaParams(), float(diag.values.mean())
            else:
                res = optimize_params(diag, p, epochs=args.epochs, restarts=args.restarts, seed=args.seed)
                params, energy = res.params, res.energy
            rep = sample_report(diag, params, shots=args.shots, thresholds=THRESHOLDS, seed=args.seed + 1)
            below = [rep.prob_below[f"{float(t)}"] for t in THRESHOLDS]
            rows.append((label, p, energy, rep.energy_mean, *below))
            print(f"{label:4s} p={p}  E={energy:7.3f}  sampled={rep.energy_mean:7.3f}  "
                  + "  ".join(f"P(<={t})={b:.3f}" for t, b in zip(THRESHOLDS, below)))

    with open(out / "prob_table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["basis", "p", "trained_energy", "sampled_energy", *[f"p_le_{t}" for t in THRESHOLDS]])
        w.writerows(rows)


if __name__ == "__main__":
    main()
