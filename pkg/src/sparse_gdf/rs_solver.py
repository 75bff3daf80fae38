"""Replica-symmetric saddle-point solver.

The four saddle equations are iterated as a map on ``(chi, Q)``::

    (chi, Q) -> Qhat = 1/(1+chi), chihat = (Q + E[y^2]) / (1+chi)^2
             -> chi' = chi_contrib/alpha, Q' = q_contrib/alpha

A damped iteration drives the state towards the attracting fixed point and a
Newton polish (``scipy.optimize.root``) finishes it once the iterate is
close, which keeps sweeps fast near the branch boundary where the map's
contraction rate approaches one.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import erfcinv

from . import scalar_penalty as sp
from .core import (
    DIVERGENCE_LEVEL,
    Branch,
    DegenerateScad,
    ElasticNet,
    L0,
    L1,
    L2,
    ModelParams,
    NonConvergence,
    NotBracketed,
    Penalty,
    RSSolution,
    RSState,
    Scad,
    erfc,
    sparsity_parameter,
    with_sparsity_parameter,
)

log = logging.getLogger(__name__)

ETA_BRACKET = (1e-8, 1e4)


def update_map(penalty: Penalty, params: ModelParams, chi: float, Q: float) -> tuple[float, float]:
    """One undamped application of the saddle-point map."""
    st = RSState.from_order_params(chi, Q, params)
    a = params.alpha
    return (
        sp.chi_contrib(penalty, st.Qhat, st.chihat) / a,
        sp.q_contrib(penalty, st.Qhat, st.chihat) / a,
    )


def _residual(penalty, params, x) -> float:
    new = update_map(penalty, params, x[0], x[1])
    return max(abs(n - o) / max(1.0, abs(o)) for n, o in zip(new, x))


def map_jacobian(penalty: Penalty, params: ModelParams, chi: float, Q: float) -> np.ndarray:
    """Central-difference Jacobian of the undamped map at ``(chi, Q)``."""
    x = np.array([chi, Q], dtype=float)
    J = np.empty((2, 2))
    for j in range(2):
        e = 1e-6 * max(abs(x[j]), 1e-3)
        xp, xm = x.copy(), x.copy()
        xp[j] += e
        xm[j] -= e
        J[:, j] = (np.array(update_map(penalty, params, *xp)) - np.array(update_map(penalty, params, *xm))) / (2 * e)
    return J


def _polish(penalty, params, x0, tol):
    """Newton-type refinement in log variables; returns None on failure."""
    x0 = np.asarray(x0, dtype=float)
    floor = 1e-300
    if np.any(x0 <= floor):
        return None

    def F(v):
        chi, Q = np.exp(v)
        try:
            c, q = update_map(penalty, params, chi, Q)
        except (DegenerateScad, ValueError):
            return np.array([1e3, 1e3])
        if c <= 0 or q <= 0:
            return np.array([1e3, 1e3])
        return np.log([c, q]) - v

    with np.errstate(all="ignore"):
        sol = optimize.root(F, np.log(x0), method="hybr", options={"xtol": 1e-15})
    if not np.all(np.isfinite(sol.x)):
        return None
    x = np.exp(sol.x)
    try:
        if _residual(penalty, params, x) > tol:
            return None
    except (DegenerateScad, ValueError):
        return None
    return x


def solve_rs(
    penalty: Penalty,
    params: ModelParams,
    init: RSState | None = None,
    *,
    damping: float = 0.5,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> RSSolution:
    """Solve the saddle-point equations and classify the branch.

    The residual is the largest change of ``(chi, Q)`` under one undamped
    application of the map, relative to ``max(1, |value|)``.
    """
    x = np.array([0.1, 0.1]) if init is None else np.array([init.chi, init.Q], dtype=float)
    gamma = damping
    prev_step = None
    above = 0
    polish_at = {20, 100, 400, 1500, 5000, 20000}
    res = math.inf
    for it in range(1, max_iter + 1):
        new = np.array(update_map(penalty, params, x[0], x[1]))
        step = new - x
        res = float(np.max(np.abs(step) / np.maximum(1.0, np.abs(x))))
        if res <= tol:
            x = new if _residual(penalty, params, new) <= res else x
            return _finite_solution(penalty, params, x, res, it)
        if it in polish_at and res < 0.1:
            xp = _polish(penalty, params, x, tol)
            if xp is not None and spectral_radius(penalty, params, xp) < 1.0:
                return _finite_solution(penalty, params, xp, _residual(penalty, params, xp), it)
        if prev_step is not None and float(np.dot(step, prev_step)) < 0:
            gamma = max(gamma / 2, 1e-3)
        prev_step = step
        x = x + gamma * step
        if x[0] > DIVERGENCE_LEVEL or x[1] > DIVERGENCE_LEVEL:
            above += 1
            if above >= 10:
                return _divergent_solution(penalty, params, x, it)
        else:
            above = 0
    raise NonConvergence(
        f"saddle-point iteration did not converge in {max_iter} steps (residual {res:.3g})",
        state=RSState.from_order_params(x[0], x[1], params),
    )


def spectral_radius(penalty: Penalty, params: ModelParams, x) -> float:
    try:
        J = map_jacobian(penalty, params, x[0], x[1])
    except DegenerateScad:
        return math.inf
    return float(np.max(np.abs(np.linalg.eigvals(J))))


def _finite_solution(penalty, params, x, res, it) -> RSSolution:
    st = RSState.from_order_params(float(x[0]), float(x[1]), params)
    rho = sp.rho_hat(penalty, st.Qhat, st.chihat)
    sol = RSSolution(
        state=st,
        rho_hat=rho,
        branch=Branch.S1,
        rs_locally_stable=True,
        at_stable=True,
        converged=True,
        residual=res,
        iterations=it,
    )
    stable = rs_branch_stability(penalty, params, sol)
    at_ok = at_stability(penalty, params, sol)
    return RSSolution(
        state=st, rho_hat=rho, branch=Branch.S1, rs_locally_stable=stable,
        at_stable=at_ok, converged=True, residual=res, iterations=it,
    )


def _divergent_solution(penalty, params, x, it) -> RSSolution:
    if isinstance(penalty, Scad) and x[1] < DIVERGENCE_LEVEL:
        branch = Branch.S2
    elif isinstance(penalty, Scad):
        branch = Branch.S3
    else:
        branch = Branch.S2
    return RSSolution(
        state=None, rho_hat=math.nan, branch=branch, rs_locally_stable=True,
        at_stable=False, converged=True, residual=math.nan, iterations=it,
    )


def s1_condition_margin(penalty: Penalty, params: ModelParams, state: RSState) -> float:
    """``alpha - P`` where the finite branch requires ``alpha > P``.

    ``P`` is ``rho + omega`` for l0 and ``rho + pi4 * k / (1 - k)`` with
    ``k = eta / (Qhat (a-1))`` for SCAD; for the convex penalties it is the
    equivalent ``alpha * chi * Qhat`` form.
    """
    Qh, ch = state.Qhat, state.chihat
    if isinstance(penalty, L0):
        (t,) = sp.thresholds(penalty, Qh, ch)
        return params.alpha - (erfc(t) + sp.omega(t))
    if isinstance(penalty, Scad):
        s = sp._scad_parts(penalty, Qh, ch)
        k = penalty.eta / (Qh * (penalty.a - 1))
        return params.alpha - (s["rho"] + k / (1 - k) * s["pi4"])
    return params.alpha - sp.chi_contrib(penalty, Qh, ch) * Qh


def rs_branch_stability(penalty: Penalty, params: ModelParams, sol: RSSolution) -> bool:
    """Local stability of the reported branch of the saddle-point map.

    On S1 both the linearisation (spectral radius < 1) and the closed-form
    existence condition ``alpha > P`` must hold. A divergent branch is
    reported stable exactly when no finite solution is attracting.
    """
    if sol.branch is Branch.S1:
        st = sol.state
        rad = spectral_radius(penalty, params, (st.chi, st.Q))
        return rad < 1.0 and s1_condition_margin(penalty, params, st) > 0
    if isinstance(penalty, L0):
        # on S1 the l0 threshold is pinned at theta0^2 = eta / E[y^2]
        t = math.sqrt(penalty.eta / params.second_moment)
        return params.alpha < erfc(t) + sp.omega(t)
    return True


def at_value(penalty: Penalty, params: ModelParams, sol: RSSolution) -> float:
    """Left-hand side of the AT condition; > 1 signals RS instability."""
    if sol.branch is not Branch.S1:
        return math.inf
    st = sol.state
    return sp.slope_square_mean(penalty, st.Qhat, st.chihat) / (params.alpha * (1 + st.chi) ** 2)


def at_closed_form(penalty: Penalty, params: ModelParams, sol: RSSolution) -> float:
    """Penalty-specific closed forms of the AT left-hand side."""
    if sol.branch is not Branch.S1 or isinstance(penalty, L0):
        return math.inf
    st = sol.state
    a = params.alpha
    rho = sol.rho_hat
    if isinstance(penalty, L1):
        return rho / a
    if isinstance(penalty, ElasticNet):
        return rho / a * (st.Qhat / (st.Qhat + penalty.eta2)) ** 2
    if isinstance(penalty, L2):
        return 1.0 / a * (st.Qhat / (st.Qhat + penalty.eta2)) ** 2
    if isinstance(penalty, Scad):
        s = sp._scad_parts(penalty, st.Qhat, st.chihat)
        bracket = rho / st.Qhat**2 + ((st.Qhat - s["ep"]) ** -2 - st.Qhat**-2) * s["pi4"]
        return bracket / (a * (1 + st.chi) ** 2)
    raise TypeError(f"unknown penalty {penalty!r}")


def at_stability(penalty: Penalty, params: ModelParams, sol: RSSolution) -> bool:
    return at_closed_form(penalty, params, sol) <= 1.0


# ---------------------------------------------------------------------------
# sparsity targeting


def _delta_of_eta(penalty, params, eta, init):
    p = with_sparsity_parameter(penalty, eta)
    try:
        sol = solve_rs(p, params, init)
    except (DegenerateScad, NonConvergence):
        if init is None:
            raise
        # a warm start from a distant eta can leave the SCAD concavity region
        sol = solve_rs(p, params, None)
    if sol.branch is not Branch.S1:
        return math.inf, sol
    return sol.rho_hat / params.alpha, sol


def eta_for_delta(
    penalty: Penalty,
    params: ModelParams,
    delta: float,
    *,
    init: RSState | None = None,
    eta_hint: float | None = None,
    xtol: float = 1e-10,
) -> tuple[Penalty, RSSolution]:
    """Tune the sparsity parameter so that ``rho_hat / alpha == delta`` on S1.

    A 200-point log-grid over ``[1e-8, 1e4]`` is walked from strong to weak
    regularisation up to the first sign change (``delta(eta)`` need not be
    monotone for l0/SCAD), then Brent's method on ``log eta`` finishes.
    Trial values on the divergent branch count as overshooting the target.
    With ``eta_hint`` (e.g. the previous point of a sweep) a local bracket
    around the hint is tried before the scan.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    lo, hi = (math.log(v) for v in ETA_BRACKET)
    if isinstance(penalty, Scad):
        # concavity of the single-body problem needs eta < Qhat (a-1) < a-1
        hi = math.log(0.85 * (penalty.a - 1))
    boundary = s1_boundary_delta(penalty, params)
    if boundary is not None and delta >= boundary:
        raise NotBracketed(f"delta={delta} lies beyond the finite branch (boundary {boundary:.6g})")
    cache: dict[float, tuple[float, RSSolution]] = {}
    warm = [init]

    def g(le):
        if le not in cache:
            try:
                d, sol = _delta_of_eta(penalty, params, math.exp(le), warm[0])
            except (NonConvergence, DegenerateScad):
                d, sol = math.inf, None
            cache[le] = (d, sol)
            if sol is not None and sol.branch is Branch.S1:
                warm[0] = sol.state
        return cache[le][0] - delta

    a = b = None
    if eta_hint is not None:
        a, b = _local_bracket(g, math.log(eta_hint), lo, hi)
    if a is None:
        # scan from strong to weak regularisation and stop at the first crossing
        grid = np.linspace(hi, lo, 200)
        b = grid[0]
        if not g(b) < 0:
            raise NotBracketed(f"delta={delta} is below the reachable range")
        for v in grid[1:]:
            if g(v) < 0:
                b = v
                continue
            a = v
            break
        if a is None:
            raise NotBracketed(f"delta={delta} is not reachable on the finite branch")
    # g = +inf marks the divergent branch; bisect until a finite upper point appears
    for _ in range(200):
        if math.isfinite(g(a)):
            break
        mid = 0.5 * (a + b)
        if g(mid) < 0:
            b = mid
        else:
            a = mid
    else:
        raise NotBracketed(f"delta={delta} is not reachable on the finite branch")
    lo, hi = a, b

    le = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    g(le)
    d, sol = cache[le]
    if abs(d - delta) > max(xtol, 1e-8):
        raise NotBracketed(f"could not reach delta={delta}: got {d}")
    return with_sparsity_parameter(penalty, math.exp(le)), sol


def _local_bracket(g, le0, lo, hi):
    """Expand ``[le0 - w, le0 + w]`` until ``g(lower) >= 0 > g(upper)``."""
    w = 0.05
    for _ in range(8):
        a, b = max(lo, le0 - w), min(hi, le0 + w)
        if g(b) < 0 <= g(a):
            return a, b
        w *= 3
    return None, None


@dataclass
class SweepRow:
    delta: float
    penalty: Penalty | None
    solution: RSSolution | None
    observables: object | None
    error: str = ""


def sweep_delta(penalty: Penalty, params: ModelParams, delta_grid) -> list[SweepRow]:
    """``eta_for_delta`` + observables along a monotone grid, warm-started.

    Grid points beyond the finite branch are reported on the divergent
    branch (``df = 1``); other failures become flagged rows.
    """
    from .model_selection import observables as _obs, divergent_solution

    rows = []
    init = hint = None
    for delta in delta_grid:
        delta = float(delta)
        try:
            p, sol = eta_for_delta(penalty, params, delta, init=init, eta_hint=hint)
            init, hint = sol.state, sparsity_parameter(p)
            rows.append(SweepRow(sol.rho_hat / params.alpha, p, sol, _obs(p, params, sol)))
        except NotBracketed as exc:
            boundary = s1_boundary_delta(penalty, params)
            if boundary is not None and delta > boundary:
                sol = divergent_solution(penalty)
                rows.append(SweepRow(delta, None, sol, _obs(penalty, params, sol), "beyond finite branch"))
            else:
                rows.append(SweepRow(delta, None, None, None, str(exc)))
        except Exception as exc:  # flagged row, sweep continues
            log.warning("sweep point delta=%g failed: %s", delta, exc)
            rows.append(SweepRow(delta, None, None, None, f"{type(exc).__name__}: {exc}"))
    return rows


# ---------------------------------------------------------------------------
# branch boundary


def _scaled_rhs(penalty, params, eta_tilde, Q):
    # (cQhat, c^2 chihat, c eta) leaves thresholds invariant; c = 1 + chi
    p = with_sparsity_parameter(penalty, eta_tilde)
    ch = Q + params.second_moment
    return sp.chi_contrib(p, 1.0, ch) / params.alpha, sp.q_contrib(p, 1.0, ch) / params.alpha, sp.rho_hat(p, 1.0, ch)


def s1_boundary_delta(penalty: Penalty, params: ModelParams) -> float | None:
    """Largest sparsity reachable on the finite branch (chi -> infinity).

    With ``eta~ = eta (1 + chi)`` the saddle equations read
    ``df = chi_contrib(1, Q + E[y^2]; eta~)/alpha`` and
    ``Q = q_contrib(1, Q + E[y^2]; eta~)/alpha``; the boundary is the
    ``eta~`` where ``df`` reaches one, i.e. ``eta = eta~ (1 - df) -> 0``.
    Returns ``None`` for penalties whose finite branch covers ``delta <= 1``.
    """
    # the boundary does not depend on the sparsity parameter itself
    return _s1_boundary(with_sparsity_parameter(penalty, 1.0), params)


@functools.lru_cache(maxsize=256)
def _s1_boundary(penalty: Penalty, params: ModelParams) -> float | None:
    if isinstance(penalty, L0):
        t = optimize.brentq(lambda t: erfc(t) + sp.omega(t) - params.alpha, 1e-12, 40.0) if params.alpha < 1 else 0.0
        return erfc(t) / params.alpha
    if not isinstance(penalty, Scad):
        return None

    upper = (penalty.a - 1) * (1 - 1e-9)  # non-degeneracy: eta~ < a - 1

    def eta_tilde(Q):
        f = lambda et: _scaled_rhs(penalty, params, et, Q)[0] - 1.0
        lo = upper * 1e-12
        if f(lo) * f(upper) > 0:
            return math.nan
        return optimize.brentq(f, lo, upper, xtol=1e-15)

    def q_gap(Q):
        et = eta_tilde(Q)
        return math.nan if math.isnan(et) else _scaled_rhs(penalty, params, et, Q)[1] - Q

    # for each Q pick eta~ on df = 1, then close the Q equation
    grid = np.logspace(-6, 6, 121)
    with np.errstate(all="ignore"):
        vals = [q_gap(Q) for Q in grid]
        for i in range(len(grid) - 1):
            if vals[i] * vals[i + 1] < 0:  # False for NaN
                Q = optimize.brentq(q_gap, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14)
                return _scaled_rhs(penalty, params, eta_tilde(Q), Q)[2] / params.alpha
    return None


def l1_closed_form(params: ModelParams, delta: float) -> tuple[float, float, float]:
    """(eta, chi, Q) on the l1 finite branch at sparsity ``delta``."""
    rho = params.alpha * delta
    t = float(erfcinv(rho))
    chi = rho / (params.alpha - rho)
    tau = (1 + 2 * t * t) * rho - sp.omega(t)
    Q = params.second_moment * tau / (params.alpha - tau)
    chihat = (Q + params.second_moment) / (1 + chi) ** 2
    return t * math.sqrt(2 * chihat), chi, Q
