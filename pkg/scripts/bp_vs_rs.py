"""Message-passing df against the RS prediction for SCAD at finite size."""

import argparse

from sparse_gdf import ModelParams, Scad, eta_for_delta, gdf
from sparse_gdf.amp import BPConfig, run_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=200)
    ap.add_argument("--M", type=int, default=100)
    ap.add_argument("--a", type=float, default=5.0)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--deltas", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7")
    args = ap.parse_args()
    params = ModelParams(args.M / args.N)
    print("delta,df_rs,df_cov,delta_eff_bp,convergence_rate")
    for d in (float(v) for v in args.deltas.split(",")):
        p, sol = eta_for_delta(Scad(1.0, args.a, args.lam), params, d)
        r = run_ensemble(p, args.M, args.N, args.samples, seed=args.seed, config=BPConfig())
        print(f"{d},{gdf(sol):.5f},{r.df_cov:.5f},{r.delta_eff:.5f},{r.convergence_rate:.3f}", flush=True)


if __name__ == "__main__":
    main()
