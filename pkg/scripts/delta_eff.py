"""df against the effective support fraction at BP fixed points, non-iid predictors."""

import argparse

from sparse_gdf import ElasticNet, L1, ModelParams, Scad, eta_for_delta
from sparse_gdf.amp import BPConfig, run_ensemble

PENALTIES = {"l1": L1(1.0), "en": ElasticNet(1.0, 0.1), "scad": Scad(1.0, 5.0, 1.0)}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=400)
    ap.add_argument("--M", type=int, default=200)
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--ensemble", default="ex1:0.5", help="iid | ex1:<c> | ex2:<T>")
    ap.add_argument("--penalty", choices=sorted(PENALTIES), default="l1")
    ap.add_argument("--deltas", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7")
    ap.add_argument("--seed", type=int, default=6)
    args = ap.parse_args()
    params = ModelParams(args.M / args.N)
    print("delta_target,mean_delta,df_cov,delta_eff_bp,convergence_rate")
    for d in (float(v) for v in args.deltas.split(",")):
        p, _ = eta_for_delta(PENALTIES[args.penalty], params, d)
        r = run_ensemble(p, args.M, args.N, args.samples, ensemble=args.ensemble, seed=args.seed, config=BPConfig())
        print(f"{d},{r.mean_delta:.5f},{r.df_cov:.5f},{r.delta_eff:.5f},{r.convergence_rate:.3f}", flush=True)


if __name__ == "__main__":
    main()
