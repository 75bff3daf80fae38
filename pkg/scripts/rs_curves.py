"""RS df and prediction error against sparsity for every penalty family.

Writes one CSV per family, e.g. ``python3 scripts/rs_curves.py --my 0.5 --out-dir out``.
"""

import argparse
import csv
import os

import numpy as np

from sparse_gdf import ElasticNet, L0, L1, ModelParams, Scad, sweep_delta
from sparse_gdf.rs_solver import at_value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--my", type=float, default=0.0)
    ap.add_argument("--sy2", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=99)
    ap.add_argument("--out-dir", default=".")
    args = ap.parse_args()
    params = ModelParams(args.alpha, args.my, args.sy2)
    grid = np.linspace(0.01, 0.99, args.points)
    families = {"l1": L1(1.0), "en": ElasticNet(1.0, 0.1), "scad": Scad(1.0, 8.0, 1.0), "l0": L0(1.0)}
    os.makedirs(args.out_dir, exist_ok=True)
    for name, base in families.items():
        path = os.path.join(args.out_dir, f"rs_{name}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "branch", "df", "err_pre", "at_value"])
            for r in sweep_delta(base, params, grid):
                if r.solution is None:
                    continue
                at = at_value(r.penalty, params, r.solution) if r.penalty is not None else float("inf")
                w.writerow([f"{r.delta:.6g}", r.solution.branch.value, f"{r.observables.df:.10g}",
                            f"{r.observables.err_pre:.10g}", f"{at:.6g}"])
        print("wrote", path)


if __name__ == "__main__":
    main()
