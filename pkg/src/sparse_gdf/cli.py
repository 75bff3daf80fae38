"""Command-line interface: ``sparse-gdf {rs-curve, bp, l0-exact}``.

Every command writes CSV (17 significant digits, a versioned comment line
first) to ``--out`` or standard output. Exit codes: 0 success, 2 usage
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .amp import BPConfig, run_ensemble
from .core import (
    ElasticNet,
    GDFError,
    L0,
    L1,
    ModelParams,
    Scad,
    TooFewSamples,
    sparsity_parameter,
    with_sparsity_parameter,
)
from .model_selection import gdf
from .oracle import exact_gdf_l0
from .rs_solver import eta_for_delta, sweep_delta
from .scalar_penalty import omega

SCHEMA = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

RS_COLUMNS = ["delta", "eta", "Q", "chi", "Qhat", "chihat", "rho_hat", "branch", "rs_stable",
              "at_stable", "df", "err_train", "err_pre", "aic", "f", "r_bar", "note"]
BP_COLUMNS = ["delta", "eta", "mean_delta", "df_rs", "df_cov", "df_sure", "delta_eff_bp",
              "convergence_rate", "mean_iterations", "n_converged", "note"]
L0_COLUMNS = ["eta", "mean_delta", "df_exact", "delta_rs", "df_rs"]

log = logging.getLogger("sparse_gdf")


class UsageError(Exception):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:count`` (inclusive linspace) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            n = int(count)
            if n < 0:
                raise ValueError
            return np.linspace(float(start), float(stop), n)
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"bad grid {text!r}; expected start:stop:count or a comma list") from None


def make_penalty(args) -> object:
    """Penalty family with a placeholder sparsity parameter."""
    eta = args.eta if args.eta is not None else 1.0
    try:
        if args.penalty == "l1":
            return L1(eta)
        if args.penalty == "en":
            return ElasticNet(eta, args.eta2)
        if args.penalty == "l0":
            return L0(eta)
        if args.penalty == "scad":
            return Scad(eta, args.a, args.lam)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"unknown penalty {args.penalty!r}")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.17g}"
    return "" if v is None else str(v)


def write_rows(command: str, columns: list[str], rows: list[dict], args) -> None:
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        out.write(f"# sparse-gdf {__version__} {command} schema={SCHEMA}\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])
    finally:
        if out is not sys.stdout:
            out.close()
    if args.json:
        def conv(v):
            if isinstance(v, (np.floating, float)):
                return None if math.isnan(v) else float(v)
            if isinstance(v, (np.integer, np.bool_)):
                return v.item()
            return v
        with open(args.json, "w") as fh:
            json.dump({"command": command, "schema": SCHEMA, "columns": columns,
                       "rows": [{c: conv(r.get(c)) for c in columns} for r in rows]}, fh, indent=1)


# ---------------------------------------------------------------------------
# commands


def cmd_rs_curve(args) -> int:
    penalty = make_penalty(args)
    params = ModelParams(args.alpha, args.my, args.sy2)
    grid = parse_grid(args.delta_grid)
    if np.any((grid <= 0) | (grid > 1)):
        raise UsageError("delta grid must lie in (0, 1]")
    rows = []
    for r in sweep_delta(penalty, params, grid):
        row = {"delta": r.delta, "note": r.error}
        sol, obs = r.solution, r.observables
        if r.penalty is not None:
            row["eta"] = sparsity_parameter(r.penalty)
        if sol is not None:
            row.update(branch=sol.branch.value, rs_stable=sol.rs_locally_stable, at_stable=sol.at_stable,
                       rho_hat=sol.rho_hat)
            if sol.state is not None:
                st = sol.state
                row.update(Q=st.Q, chi=st.chi, Qhat=st.Qhat, chihat=st.chihat)
        if obs is not None:
            row.update(df=obs.df, err_train=obs.err_train, err_pre=obs.err_pre, aic=obs.aic,
                       f=obs.free_energy, r_bar=obs.r_bar)
        rows.append(row)
    write_rows("rs-curve", RS_COLUMNS, rows, args)
    return 0


def _bp_point(job):
    penalty, params, delta, M, N, args = job
    row = {"delta": delta, "eta": sparsity_parameter(penalty)}
    if not math.isnan(delta):
        try:
            _, sol = eta_for_delta(penalty, params, delta)
            row["df_rs"] = gdf(sol)
        except GDFError as exc:
            row["note"] = f"rs: {exc}"
    cfg = BPConfig(damping=args.damping, tol=args.tol, max_iter=args.max_iter)
    res = run_ensemble(penalty, M, N, args.samples, ensemble=args.ensemble, m_y=args.my,
                       sigma_y2=args.sy2, seed=args.seed, config=cfg, sure_samples=args.sure)
    row.update(mean_delta=res.mean_delta, df_cov=res.df_cov, df_sure=res.df_sure,
               delta_eff_bp=res.delta_eff, convergence_rate=res.convergence_rate,
               mean_iterations=res.mean_iterations, n_converged=res.n_converged)
    if res.n_converged < 2:
        row["note"] = (row.get("note", "") + f" {TooFewSamples.__name__}: df_cov needs two converged samples").strip()
    return row


def cmd_bp(args) -> int:
    base = make_penalty(args)
    if isinstance(base, L0):
        log.warning("message passing is not expected to converge for l0")
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    M, N = args.M, args.N
    params = ModelParams(M / N, args.my, args.sy2)
    jobs = []
    if args.eta_grid:
        for e in parse_grid(args.eta_grid):
            jobs.append((with_sparsity_parameter(base, float(e)), params, math.nan, M, N, args))
    else:
        for d in parse_grid(args.delta_grid):
            p, _ = eta_for_delta(base, params, float(d))
            jobs.append((p, params, float(d), M, N, args))
    rows = _map(_bp_point, jobs, args.threads)
    write_rows("bp", BP_COLUMNS, rows, args)
    return 0


def cmd_l0_exact(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    params = ModelParams(args.alpha, args.my, args.sy2)
    S2 = params.second_moment
    if args.eta_grid:
        etas = parse_grid(args.eta_grid)
    else:
        from scipy.special import erfcinv

        d = parse_grid(args.delta_grid)
        etas = S2 * erfcinv(params.alpha * d) ** 2
    res = exact_gdf_l0(params, args.N, etas, args.samples, args.seed, workers=args.threads)
    rows = []
    for e, df, md in zip(res.eta, res.df, res.mean_delta):
        t = math.sqrt(e / S2)
        d_rs = math.erfc(t) / params.alpha
        rows.append({"eta": e, "mean_delta": md, "df_exact": df, "delta_rs": d_rs,
                     "df_rs": d_rs + omega(t) / params.alpha})
    write_rows("l0-exact", L0_COLUMNS, rows, args)
    return 0


def _map(fn, jobs, threads):
    if threads and threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


# ---------------------------------------------------------------------------
# parser


def _add_common(p, *, penalty=True):
    if penalty:
        # checked after config merging so that a config file may supply it
        p.add_argument("--penalty", choices=["l1", "en", "l0", "scad"], default=None)
        p.add_argument("--eta", type=float, default=None, help="starting sparsity parameter")
        p.add_argument("--eta2", type=float, default=0.1, help="elastic net ridge weight")
        p.add_argument("--a", type=float, default=8.0, help="SCAD a")
        p.add_argument("--lam", type=float, default=1.0, help="SCAD lambda")
    p.add_argument("--my", type=float, default=0.0, help="data mean")
    p.add_argument("--sy2", type=float, default=1.0, help="data variance")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.add_argument("--json", default=None, help="also write a JSON summary here")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--config", default=None, help="file of key=value lines preloading flags")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparse-gdf", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    ap.commands = {}

    p = sub.add_parser("rs-curve", help="RS observables along a sparsity grid")
    _add_common(p)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--delta-grid", default="0.01:0.99:99")
    p.set_defaults(func=cmd_rs_curve)
    ap.commands["rs-curve"] = p

    p = sub.add_parser("bp", help="message-passing ensembles: df estimators per sparsity")
    _add_common(p)
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--M", type=int, default=100)
    p.add_argument("--ensemble", default="iid", help="iid | ex1:<c> | ex2:<T>")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sure", type=int, default=0, help="members used for the finite-difference estimate")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--delta-grid", default="0.1:0.5:5", help="RS sparsity targets")
    g.add_argument("--eta-grid", default=None, help="explicit sparsity-parameter grid")
    p.set_defaults(func=cmd_bp)
    ap.commands["bp"] = p

    p = sub.add_parser("l0-exact", help="exact l0 df by exhaustive search")
    _add_common(p, penalty=False)
    p.add_argument("--N", type=int, default=12)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--eta-grid", default=None)
    g.add_argument("--delta-grid", default="0.05:0.2:4", help="RS sparsity targets mapped to eta")
    p.set_defaults(func=cmd_l0_exact)
    ap.commands["l0-exact"] = p
    return ap


def _read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"config line without '=': {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.lstrip("-").replace("-", "_")] = v
    return out


def parse_args(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        cfg = _read_config(args.config)
        sub = ap.commands[args.command]
        known = {a.dest: a for a in sub._actions}
        for k in cfg:
            if k not in known or k in ("help", "config"):
                raise UsageError(f"unknown config key {k!r}")
            if known[k].choices and cfg[k] not in known[k].choices:
                raise UsageError(f"config value {cfg[k]!r} not allowed for {k!r}")
        # config values become defaults, explicit flags still win
        sub.set_defaults(**{k: (known[k].type(v) if known[k].type else v) for k, v in cfg.items()})
        args = ap.parse_args(argv)
    if hasattr(args, "penalty") and args.penalty is None:
        raise UsageError("--penalty is required")
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"sparse-gdf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sparse-gdf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GDFError, FloatingPointError) as exc:
        print(f"sparse-gdf: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
