"""Prediction-error minima and crossovers for l1, elastic net and SCAD."""

import argparse

from sparse_gdf import ElasticNet, L1, ModelParams, Scad, crossover_points, minimize_prediction_error


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--my", type=float, default=0.5)
    ap.add_argument("--sy2", type=float, default=1.0)
    ap.add_argument("--eta2", type=float, default=0.1)
    args = ap.parse_args()
    params = ModelParams(args.alpha, args.my, args.sy2)
    fams = {"l1": L1(1.0), "en": ElasticNet(1.0, args.eta2), "scad": Scad(1.0, 8.0, 1.0)}
    for name, p in fams.items():
        d, ob = minimize_prediction_error(p, params)
        print(f"minimum {name:5s} delta={d:.5f} err_pre={ob.err_pre:.6f} df={ob.df:.5f}")
    for a, b in [("l1", "en"), ("en", "scad"), ("l1", "scad")]:
        roots = crossover_points(fams[a], fams[b], params, (0.005, 0.5))
        print(f"crossover {a}/{b}: {[round(r, 5) for r in roots]}")


if __name__ == "__main__":
    main()
