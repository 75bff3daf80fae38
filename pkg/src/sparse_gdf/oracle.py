"""Exact and reference solvers for finite instances.

* ``best_subset_l0``: global minimiser of ``||y - A x||^2 / 2 + eta ||x||_0``
  by enumeration (small N) or depth-first branch-and-bound.
* ``coord_descent``: cyclic coordinate minimisation for l1, elastic net and
  SCAD. The coordinate step compares candidate points piece by piece and
  does not reuse the closed-form thresholds of ``scalar_penalty``.
* ``exact_gdf_l0``: Monte Carlo df of the exact l0 estimator.
"""

from __future__ import annotations

import functools
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .amp import Instance, gdf_covariance, sample_seeds
from .core import (
    ElasticNet,
    L1,
    ModelParams,
    NonConvergence,
    Penalty,
    Scad,
    TooLarge,
)
from .datagen import gen_gaussian_iid, gen_y
from .scalar_penalty import penalty_value

MAX_ENUMERATION = 22
MAX_BRANCH_AND_BOUND = 50
_CHUNK = 50_000


@dataclass
class L0Fit:
    x: np.ndarray
    support: tuple[int, ...]
    objective: float
    singular: bool = False


# ---------------------------------------------------------------------------
# l0 best subset


def _subset_rss(G, b, yy, subsets: np.ndarray) -> tuple[np.ndarray, bool]:
    """RSS of least squares on each row of ``subsets`` (shape (B, k))."""
    Gs = G[subsets[:, :, None], subsets[:, None, :]]
    bs = b[subsets]
    try:
        # yy - b' G^-1 b = yy - |L^-1 b|^2 with G = L L'
        L = np.linalg.cholesky(Gs)
    except np.linalg.LinAlgError:
        coef = (np.linalg.pinv(Gs) @ bs[..., None])[..., 0]
        return np.maximum(yy - np.einsum("bk,bk->b", bs, coef), 0.0), True
    k = subsets.shape[1]
    u = np.empty_like(bs)
    for j in range(k):
        u[:, j] = (bs[:, j] - np.einsum("bi,bi->b", L[:, j, :j], u[:, :j])) / L[:, j, j]
    return np.maximum(yy - np.einsum("bk,bk->b", u, u), 0.0), False


def _coefficients(inst: Instance, support) -> tuple[np.ndarray, bool]:
    x = np.zeros(inst.N)
    if not support:
        return x, False
    As = inst.A[:, list(support)]
    G = As.T @ As
    singular = np.linalg.matrix_rank(G) < len(support)
    x[list(support)] = np.linalg.pinv(As) @ inst.y if singular else np.linalg.solve(G, As.T @ inst.y)
    return x, bool(singular)


def best_rss_per_size(inst: Instance, k_max: int | None = None) -> tuple[np.ndarray, list[tuple[int, ...]], bool]:
    """Smallest residual sum of squares over all supports of each size ``k``.

    Sizes beyond ``M`` are skipped: a support of size ``M`` already fits
    the data exactly (for generic ``A``), so larger ones only add penalty.
    Returns ``(rss[k], support[k], any_singular)`` for ``k = 0..k_max``.
    """
    N, M = inst.N, inst.M
    if N > MAX_ENUMERATION:
        raise TooLarge(f"enumeration is limited to N <= {MAX_ENUMERATION}, got {N}")
    k_max = min(N, M) if k_max is None else min(k_max, N)
    G, b, yy = inst.A.T @ inst.A, inst.A.T @ inst.y, float(inst.y @ inst.y)
    rss = np.empty(k_max + 1)
    best: list[tuple[int, ...]] = []
    singular = False
    rss[0] = yy
    best.append(())
    for k in range(1, k_max + 1):
        top, arg = math.inf, ()
        combos = _combinations(N, k)
        for start in range(0, len(combos), _CHUNK):
            chunk = combos[start:start + _CHUNK]
            r, sing = _subset_rss(G, b, yy, chunk)
            singular |= sing
            j = int(np.argmin(r))
            if r[j] < top:
                top, arg = float(r[j]), tuple(int(v) for v in chunk[j])
        rss[k] = top
        best.append(arg)
    return rss, best, singular


@functools.lru_cache(maxsize=64)
def _combinations(N: int, k: int) -> np.ndarray:
    out = np.array(list(itertools.combinations(range(N), k)), dtype=np.intp)
    out.setflags(write=False)
    return out


def _pick(rss: np.ndarray, eta: float) -> int:
    # ties go to the smaller support
    return int(np.argmin(0.5 * rss + eta * np.arange(len(rss))))


def _branch_and_bound(inst: Instance, eta: float) -> tuple[tuple[int, ...], float]:
    """Depth-first include/exclude search.

    Bound at a node: least squares on (included + undecided) variables plus
    ``eta`` times the included count; adding variables never raises RSS.
    """
    A, y = inst.A, inst.y
    N, M = inst.N, inst.M
    yy = float(y @ y)
    order = list(np.argsort(-np.abs(A.T @ y)))

    def rss(cols):
        if not cols:
            return yy
        if len(cols) >= M:
            As = A[:, cols]
            if np.linalg.matrix_rank(As) >= M:
                return 0.0
        coef, *_ = np.linalg.lstsq(A[:, cols], y, rcond=None)
        r = y - A[:, cols] @ coef
        return float(r @ r)

    best_cost, best_set = 0.5 * yy, ()

    def visit(depth, inc):
        nonlocal best_cost, best_set
        if eta * len(inc) >= 0.5 * yy:  # cannot beat the empty support
            return
        if depth == N:
            c = 0.5 * rss(inc) + eta * len(inc)
            if c < best_cost:
                best_cost, best_set = c, tuple(sorted(int(i) for i in inc))
            return
        bound = 0.5 * rss(inc + order[depth:]) + eta * len(inc)
        if bound >= best_cost:
            return
        visit(depth + 1, inc + [order[depth]])
        visit(depth + 1, inc)

    visit(0, [])
    return best_set, best_cost


def best_subset_l0(inst: Instance, eta: float, *, method: str = "auto") -> L0Fit:
    """Global minimiser of ``||y - A x||^2 / 2 + eta * ||x||_0``."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if method == "auto":
        method = "enumerate" if inst.N <= MAX_ENUMERATION else "bnb"
    if method == "enumerate":
        rss, supports, _ = best_rss_per_size(inst)
        k = _pick(rss, eta)
        support = supports[k]
        obj = 0.5 * rss[k] + eta * k
    elif method == "bnb":
        if inst.N > MAX_BRANCH_AND_BOUND:
            raise TooLarge(f"branch-and-bound is limited to N <= {MAX_BRANCH_AND_BOUND}, got {inst.N}")
        support, obj = _branch_and_bound(inst, eta)
    else:
        raise ValueError(f"unknown method {method!r}")
    x, singular = _coefficients(inst, support)
    return L0Fit(x, tuple(support), float(obj), singular)


def brute_force_l0(inst: Instance, eta: float) -> L0Fit:
    """Every support of every size, no pruning; for cross-checks at small N."""
    if inst.N > 16:
        raise TooLarge("brute force is meant for N <= 16")
    best = None
    for k in range(inst.N + 1):
        for S in itertools.combinations(range(inst.N), k):
            x, sing = _coefficients(inst, S)
            r = inst.y - inst.A @ x
            c = 0.5 * float(r @ r) + eta * k
            if best is None or c < best.objective - 1e-12:
                best = L0Fit(x, S, c, sing)
    return best


# ---------------------------------------------------------------------------
# coordinate descent


def objective(inst: Instance, penalty: Penalty, x: np.ndarray) -> float:
    r = inst.y - inst.A @ x
    return 0.5 * float(r @ r) + float(np.sum(penalty_value(penalty, x)))


def _pieces(penalty: Penalty):
    """(lo, hi, linear, quadratic) pieces of the penalty on ``|x|``."""
    if isinstance(penalty, L1):
        return [(0.0, math.inf, penalty.eta, 0.0)]
    if isinstance(penalty, ElasticNet):
        return [(0.0, math.inf, penalty.eta1, penalty.eta2)]
    if isinstance(penalty, Scad):
        eta, a, lam = penalty.eta, penalty.a, penalty.lam
        return [
            (0.0, lam, eta * lam, 0.0),
            (lam, a * lam, eta * a * lam / (a - 1), -eta / (a - 1)),
            (a * lam, math.inf, 0.0, 0.0),
        ]
    raise TypeError(f"coordinate descent does not support {penalty!r}")


def coordinate_prox(penalty: Penalty, z: float, c: float) -> float:
    """argmin_x  c x^2/2 - z x + r(x)  by comparing candidates on every piece."""
    if z == 0:
        return 0.0
    az = abs(z)
    cands = {0.0}
    for lo, hi, lin, quad in _pieces(penalty):
        cands.add(lo)
        if math.isfinite(hi):
            cands.add(hi)
        curv = c + quad
        if curv > 0:
            t = (az - lin) / curv
            cands.add(min(max(t, lo), hi))
    cands = sorted(cands)
    vals = [0.5 * c * t * t - az * t + float(penalty_value(penalty, t)) for t in cands]
    best = min(vals)
    # smallest magnitude among near-ties
    t = next(t for t, v in zip(cands, vals) if v <= best + 1e-15 * max(1.0, abs(best)))
    return math.copysign(t, z)


def _cd_single(inst: Instance, penalty: Penalty, x0: np.ndarray, tol: float, max_sweeps: int) -> np.ndarray:
    A, y = inst.A, inst.y
    x = x0.copy()
    r = y - A @ x
    cols = [A[:, i].copy() for i in range(inst.N)]
    norms = [float(a @ a) for a in cols]
    for _ in range(max_sweeps):
        dmax = 0.0
        for i in range(inst.N):
            a = cols[i]
            if norms[i] == 0:
                continue
            z = float(a @ r) + norms[i] * x[i]
            xi = coordinate_prox(penalty, z, norms[i])
            d = xi - x[i]
            if d != 0.0:
                r -= d * a
                x[i] = xi
                dmax = max(dmax, abs(d))
        if dmax <= tol:
            return x
    raise NonConvergence(f"coordinate descent did not converge in {max_sweeps} sweeps", state=x)


def coord_descent(
    inst: Instance,
    penalty: Penalty,
    tol: float = 1e-12,
    *,
    max_sweeps: int = 100_000,
    starts: int | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Cyclic coordinate descent; SCAD keeps the best of several starts.

    Starts are zero, the minimum-norm least-squares fit and random draws.
    """
    if starts is None:
        starts = 5 if isinstance(penalty, Scad) else 1
    inits = [np.zeros(inst.N)]
    if starts > 1:
        inits.append(np.linalg.lstsq(inst.A, inst.y, rcond=None)[0])
        rng = np.random.default_rng(seed)
        scale = np.std(inits[-1]) or 1.0
        inits += [scale * rng.standard_normal(inst.N) for _ in range(starts - 2)]
    best, best_obj = None, math.inf
    for x0 in inits[:starts]:
        x = _cd_single(inst, penalty, x0, tol, max_sweeps)
        o = objective(inst, penalty, x)
        if o < best_obj - 1e-12:
            best, best_obj = x, o
    return best


# ---------------------------------------------------------------------------
# exact df for l0


@dataclass
class ExactGDF:
    eta: np.ndarray
    df: np.ndarray
    mean_delta: np.ndarray


def _exact_chunk(job):
    params, N, M, etas, seeds = job
    pairs = [[] for _ in etas]
    sizes = np.zeros((len(etas), len(seeds)))
    for s, (sa, sy) in enumerate(seeds):
        inst = Instance(gen_gaussian_iid(M, N, sa), gen_y(M, params.m_y, params.sigma_y2, sy))
        rss, supports, _ = best_rss_per_size(inst)
        for j, e in enumerate(etas):
            k = _pick(rss, e)
            x, _ = _coefficients(inst, supports[k])
            pairs[j].append((inst.y, inst.A @ x))
            sizes[j, s] = k
    return pairs, sizes


def exact_gdf_l0(params: ModelParams, N: int, eta, S: int, seed: int = 0, *, workers: int = 1) -> ExactGDF:
    """Covariance df of the exact l0 estimator over ``S`` fresh instances.

    One enumeration per instance serves every ``eta`` in the grid. With
    ``workers > 1`` instances are split over processes; results are merged
    in instance order and do not depend on ``workers``.
    """
    M = int(round(params.alpha * N))
    if M < 1:
        raise ValueError("alpha * N must be at least one")
    if N > MAX_ENUMERATION:
        raise TooLarge(f"exact df needs N <= {MAX_ENUMERATION}")
    etas = np.atleast_1d(np.asarray(eta, dtype=float))
    seeds = sample_seeds(seed, S)
    n_chunks = max(1, min(workers, S))
    bounds = np.linspace(0, S, n_chunks + 1).astype(int)
    jobs = [(params, N, M, etas, seeds[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
    if n_chunks > 1:
        with ProcessPoolExecutor(max_workers=n_chunks) as ex:
            parts = list(ex.map(_exact_chunk, jobs))
    else:
        parts = [_exact_chunk(j) for j in jobs]
    pairs = [sum((p[0][j] for p in parts), []) for j in range(len(etas))]
    sizes = np.concatenate([p[1] for p in parts], axis=1)
    df = np.array([gdf_covariance(p, params.m_y, params.sigma_y2) for p in pairs])
    return ExactGDF(etas, df, sizes.mean(axis=1) / M)
