"""Exact l0 df by exhaustive search against the RS relation at the measured sparsity."""

import argparse

import numpy as np
from scipy.special import erfcinv

from sparse_gdf import ModelParams
from sparse_gdf.oracle import exact_gdf_l0
from sparse_gdf.scalar_penalty import omega


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="12,16,20")
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--samples", type=int, default=500)
    ap.add_argument("--deltas", default="0.05,0.1,0.15,0.2", help="RS targets that fix the eta grid")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    params = ModelParams(args.alpha)
    targets = np.array([float(v) for v in args.deltas.split(",")])
    etas = params.second_moment * erfcinv(params.alpha * targets) ** 2
    print("N,eta,mean_delta,df_exact,df_rs_at_mean_delta")
    for N in (int(v) for v in args.sizes.split(",")):
        r = exact_gdf_l0(params, N, etas, args.samples, seed=N, workers=args.workers)
        for e, md, df in zip(r.eta, r.mean_delta, r.df):
            t = float(erfcinv(params.alpha * md))
            print(f"{N},{e:.6g},{md:.5f},{df:.5f},{md + omega(t) / params.alpha:.5f}", flush=True)


if __name__ == "__main__":
    main()
