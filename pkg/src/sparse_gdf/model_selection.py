"""Observables of an RS solution and prediction-error based model selection."""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from . import scalar_penalty as sp
from .core import (
    Branch,
    ElasticNet,
    L0,
    L1,
    L2,
    ModelParams,
    NoMinimumInRange,
    Observables,
    Penalty,
    RSSolution,
    Scad,
    erfc,
    sparsity_parameter,
)
from .rs_solver import eta_for_delta


def gdf(sol: RSSolution) -> float:
    """Generalised degrees of freedom ``chi / (1 + chi)``; 1 on divergent branches."""
    if sol.branch is not Branch.S1:
        return 1.0
    chi = sol.state.chi
    return chi / (1.0 + chi)


def divergent_solution(penalty: Penalty, branch: Branch = Branch.S2) -> RSSolution:
    return RSSolution(
        state=None, rho_hat=math.nan, branch=branch, rs_locally_stable=True,
        at_stable=False, converged=True, residual=math.nan,
    )


def free_energy(penalty: Penalty, params: ModelParams, sol: RSSolution) -> float:
    """RS free energy density evaluated at the saddle point."""
    st = sol.state
    a = params.alpha
    return (
        a * (st.Q + params.second_moment) / (2 * (1 + st.chi))
        - a * (st.Q * st.Qhat - st.chi * st.chihat) / 2
        - sp.pi_value(penalty, st.Qhat, st.chihat) / 2
    )


def expected_penalty(penalty: Penalty, params: ModelParams, sol: RSSolution) -> float:
    """Mean regulariser per component, simplified with the saddle equations."""
    st = sol.state
    a = params.alpha
    chi, Q, Qh, ch = st.chi, st.Q, st.Qhat, st.chihat
    if isinstance(penalty, L1):
        return a * (chi * ch - Q * Qh)
    if isinstance(penalty, (ElasticNet, L2)):
        return a * (ch * chi - (Qh + penalty.eta2) * Q) + a * penalty.eta2 * Q / 2
    if isinstance(penalty, L0):
        return penalty.eta * sol.rho_hat
    if isinstance(penalty, Scad):
        s = sp._scad_parts(penalty, Qh, ch)
        eta, aa, lam = penalty.eta, penalty.a, penalty.lam
        ep = s["ep"]
        return (
            a * chi * ch
            - s["pi1"]
            - (1 + ep / (2 * (Qh - ep))) * s["pi2"]
            - s["pi3"]
            - eta * lam**2 / (2 * (aa - 1)) * s["pi4"]
            + eta * (aa + 1) * lam**2 / 2 * erfc(s["t3"])
        )
    raise TypeError(f"unknown penalty {penalty!r}")


def observables(penalty: Penalty, params: ModelParams, sol: RSSolution) -> Observables:
    """df, training/prediction error, AIC and the free-energy split.

    On divergent branches the training error vanishes (chihat -> 0) and
    only ``df``, ``err_pre`` and ``aic`` are meaningful; the rest are NaN.
    """
    df = gdf(sol)
    s2 = params.sigma_y2
    if sol.branch is not Branch.S1:
        return Observables(df=1.0, err_train=0.0, err_pre=2 * s2, r_bar=math.nan,
                           free_energy=math.nan, aic=2.0)
    err_train = sol.state.chihat
    return Observables(
        df=df,
        err_train=err_train,
        err_pre=err_train + 2 * s2 * df,
        r_bar=expected_penalty(penalty, params, sol),
        free_energy=free_energy(penalty, params, sol),
        aic=err_train / s2 + 2 * df,
    )


class _Curve:
    """err_pre as a function of delta with warm-started solves."""

    def __init__(self, penalty: Penalty, params: ModelParams):
        self.penalty = penalty
        self.params = params
        self.init = None
        self.hint = None

    def __call__(self, delta: float) -> float:
        p, sol = eta_for_delta(self.penalty, self.params, float(delta), init=self.init, eta_hint=self.hint)
        self.init, self.hint = sol.state, sparsity_parameter(p)
        return observables(p, self.params, sol).err_pre


def prediction_error_curve(penalty: Penalty, params: ModelParams, delta_grid) -> np.ndarray:
    """err_pre on the grid; points off the finite branch are NaN."""
    f = _Curve(penalty, params)
    out = []
    for d in delta_grid:
        try:
            out.append(f(d))
        except Exception:
            out.append(math.nan)
    return np.asarray(out)


def minimize_prediction_error(
    penalty: Penalty,
    params: ModelParams,
    delta_range: tuple[float, float] = (0.005, 0.5),
    n_grid: int = 200,
    xtol: float = 1e-5,
) -> tuple[float, Observables]:
    """Sparsity minimising the RS prediction error inside ``delta_range``."""
    grid = np.linspace(*delta_range, n_grid)
    err = prediction_error_curve(penalty, params, grid)
    if np.all(np.isnan(err)):
        raise NoMinimumInRange("no finite-branch point in range")
    i = int(np.nanargmin(err))
    if i == 0 or i == n_grid - 1:
        raise NoMinimumInRange(f"prediction error is minimised at the range edge delta={grid[i]}")
    f = _Curve(penalty, params)
    res = optimize.minimize_scalar(f, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                                   options={"xatol": xtol})
    p, sol = eta_for_delta(penalty, params, float(res.x))
    return float(res.x), observables(p, params, sol)


def crossover_points(
    first: Penalty,
    second: Penalty,
    params: ModelParams,
    delta_range: tuple[float, float] = (0.005, 0.5),
    n_grid: int = 200,
    xtol: float = 1e-6,
) -> list[float]:
    """Sparsities where the two prediction-error curves intersect."""
    if first == second:
        return []
    grid = np.linspace(*delta_range, n_grid)
    diff = prediction_error_curve(first, params, grid) - prediction_error_curve(second, params, grid)
    f1, f2 = _Curve(first, params), _Curve(second, params)
    roots = []
    for i in range(n_grid - 1):
        d0, d1 = diff[i], diff[i + 1]
        if np.isnan(d0) or np.isnan(d1) or d0 * d1 > 0 or d0 == d1 == 0:
            continue
        if d0 == 0:
            roots.append(float(grid[i]))
            continue
        if d1 == 0:
            continue
        roots.append(optimize.brentq(lambda d: f1(d) - f2(d), grid[i], grid[i + 1], xtol=xtol))
    return roots
