import math

import numpy as np
import pytest
from scipy import integrate

from sparse_gdf import scalar_penalty as sp
from sparse_gdf.core import (
    Branch,
    ElasticNet,
    L0,
    L1,
    L2,
    ModelParams,
    NoMinimumInRange,
    Scad,
    gauss_density,
)
from sparse_gdf.model_selection import (
    crossover_points,
    divergent_solution,
    expected_penalty,
    gdf,
    minimize_prediction_error,
    observables,
    prediction_error_curve,
)
from sparse_gdf.rs_solver import solve_rs

PARAMS = [ModelParams(0.5), ModelParams(0.5, 0.5, 1.0), ModelParams(0.8, 0.2, 1.7)]
PENALTIES = [L1(0.5), ElasticNet(0.5, 0.1), L2(0.3), L0(2.0), Scad(0.7, 8.0, 1.0)]
IDS = ["l1", "en", "l2", "l0", "scad"]


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
@pytest.mark.parametrize("params", PARAMS)
def test_observable_identities(penalty, params):
    sol = solve_rs(penalty, params)
    ob = observables(penalty, params, sol)
    assert ob.df == pytest.approx(sol.state.chi / (1 + sol.state.chi), rel=1e-14)
    assert ob.err_train == sol.state.chihat
    assert ob.err_pre - ob.err_train == pytest.approx(2 * params.sigma_y2 * ob.df, rel=1e-13)
    assert ob.aic == pytest.approx(ob.err_train / params.sigma_y2 + 2 * ob.df, rel=1e-13)
    # free energy splits into half the training error plus the mean penalty
    assert ob.free_energy - ob.r_bar == pytest.approx(params.alpha * ob.err_train / 2, abs=1e-10)


@pytest.mark.parametrize("penalty", PENALTIES, ids=IDS)
def test_expected_penalty_by_quadrature(penalty):
    params = ModelParams(0.5, 0.5, 1.0)
    sol = solve_rs(penalty, params)
    Qh, ch = sol.state.Qhat, sol.state.chihat
    s = math.sqrt(ch)
    br = () if isinstance(penalty, L2) else tuple(math.sqrt(2) * t for t in sp.thresholds(penalty, Qh, ch))
    pts = sorted({0.0, *br, 40.0})
    f = lambda z: sp.penalty_value(penalty, sp.single_body_argmax(penalty, s * z, Qh)) * gauss_density(z)
    ref = 2 * sum(integrate.quad(f, a, b, epsabs=1e-14, limit=200)[0] for a, b in zip(pts[:-1], pts[1:]))
    assert expected_penalty(penalty, params, sol) == pytest.approx(ref, abs=1e-9)


def test_divergent_observables():
    params = ModelParams(0.5, 0.0, 2.0)
    ob = observables(L0(1.0), params, divergent_solution(L0(1.0), Branch.S2))
    assert (ob.df, ob.err_train, ob.err_pre, ob.aic) == (1.0, 0.0, 4.0, 2.0)
    assert math.isnan(ob.r_bar) and math.isnan(ob.free_energy)
    assert gdf(divergent_solution(Scad(1, 8, 1), Branch.S3)) == 1.0


def test_prediction_error_curve_nan_off_branch():
    err = prediction_error_curve(L0(1.0), ModelParams(0.5), [0.1, 0.3])
    assert np.isfinite(err[0]) and np.isnan(err[1])


def test_minimum_l1():
    d, ob = minimize_prediction_error(L1(1.0), ModelParams(0.5, 0.5, 1.0), (0.01, 0.3), n_grid=60)
    assert d == pytest.approx(0.085, abs=0.005)
    assert ob.err_pre < observables(L1(1.0), ModelParams(0.5, 0.5, 1.0), solve_rs(L1(1.0), ModelParams(0.5, 0.5, 1.0))).err_pre


def test_minimum_at_edge_raises():
    with pytest.raises(NoMinimumInRange):
        minimize_prediction_error(L1(1.0), ModelParams(0.5, 0.5, 1.0), (0.2, 0.4), n_grid=20)


def test_crossover_same_family_is_empty():
    assert crossover_points(L1(1.0), L1(1.0), ModelParams(0.5)) == []


def test_crossover_root_is_equal_error():
    params = ModelParams(0.5, 0.5, 1.0)
    roots = crossover_points(L1(1.0), ElasticNet(1.0, 0.1), params, (0.01, 0.06), n_grid=12)
    assert len(roots) == 1
    e = prediction_error_curve(L1(1.0), params, roots) - prediction_error_curve(ElasticNet(1.0, 0.1), params, roots)
    assert abs(e[0]) < 1e-6
