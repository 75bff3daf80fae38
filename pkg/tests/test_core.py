import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from sparse_gdf.core import (
    Branch,
    ElasticNet,
    L0,
    L1,
    L2,
    ModelParams,
    RSState,
    Scad,
    erfc,
    gauss_density,
    penalty_name,
    sparsity_parameter,
    tail_moments,
    with_sparsity_parameter,
)
from sparse_gdf.model_selection import divergent_solution


def test_erfc_frozen():
    assert erfc(1.0) == pytest.approx(0.157299207050285, abs=1e-15)
    assert erfc(0.0) == 1.0
    assert erfc(math.inf) == 0.0
    assert erfc(-math.inf) == 2.0


@given(st.floats(-6, 6))
def test_erfc_matches_scipy(a):
    assert erfc(a) == pytest.approx(float(special.erfc(a)), rel=1e-14, abs=1e-300)


def test_erfc_array():
    a = np.array([0.0, 0.5, 2.0])
    np.testing.assert_allclose(erfc(a), special.erfc(a))


@pytest.mark.parametrize("u,v", [(0.0, math.inf), (0.3, 1.7), (1.2, math.inf), (2.0, 2.0)])
def test_tail_moments_quadrature(u, v):
    got = tail_moments(u, v)
    for k in range(3):
        ref = 2 * integrate.quad(lambda z: z**k * gauss_density(z), u, v)[0] if v > u else 0.0
        assert got[k] == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: L1(0.0),
        lambda: L1(math.nan),
        lambda: ElasticNet(-1.0, 0.1),
        lambda: L2(0.0),
        lambda: L0(-1.0),
        lambda: Scad(1.0, 2.0, 1.0),
        lambda: Scad(1.0, 5.0, 0.0),
        lambda: ModelParams(0.0),
        lambda: ModelParams(0.5, sigma_y2=0.0),
        lambda: ModelParams(0.5, m_y=math.inf),
    ],
)
def test_validation(bad):
    with pytest.raises(ValueError):
        bad()


def test_elastic_net_allows_zero_parts():
    ElasticNet(0.0, 0.1)
    ElasticNet(0.3, 0.0)


def test_second_moment():
    assert ModelParams(0.5, 0.5, 1.0).second_moment == 1.25


def test_sparsity_parameter_roundtrip():
    for p in [L1(1.0), ElasticNet(1.0, 0.1), L2(0.2), L0(0.3), Scad(0.5, 8, 1)]:
        q = with_sparsity_parameter(p, 2.5)
        assert sparsity_parameter(q) == 2.5
        assert type(q) is type(p)
    assert with_sparsity_parameter(ElasticNet(1.0, 0.1), 3.0).eta2 == 0.1


def test_penalty_name():
    assert [penalty_name(p) for p in (L1(1), ElasticNet(1, 1), L2(1), L0(1), Scad(1, 3, 1))] == [
        "l1", "en", "l2", "l0", "scad",
    ]


def test_rs_state_conjugates():
    s = RSState.from_order_params(1.0, 0.5, ModelParams(0.5, 0.5, 1.0))
    assert s.Qhat == 0.5
    assert s.chihat == pytest.approx((0.5 + 1.25) / 4)


def test_divergent_sentinel():
    sol = divergent_solution(L0(1.0))
    assert sol.state is None
    assert sol.divergent and sol.branch is Branch.S2
    assert sol.chi == math.inf
