import numpy as np
import pytest

from sparse_gdf.amp import (
    BPConfig,
    BPState,
    Instance,
    bp_run,
    bp_run_batch,
    bp_step,
    delta_eff_bp,
    gdf_covariance,
    gdf_sure_fd,
    run_ensemble,
    sample_seeds,
)
from sparse_gdf.core import DimensionMismatch, ElasticNet, L1, L2, NonConvergence, Scad, TooFewSamples
from sparse_gdf.datagen import gen_gaussian_iid, gen_y
from sparse_gdf.oracle import coord_descent


def _inst(M=40, N=80, seed=0, m_y=0.0):
    return Instance(gen_gaussian_iid(M, N, seed), gen_y(M, m_y, 1.0, seed + 1000))


def _subgradient_gap(inst, x, eta1, eta2=0.0):
    g = inst.A.T @ (inst.y - inst.A @ x) - eta2 * x
    on = x != 0
    gap_on = np.max(np.abs(g[on] - eta1 * np.sign(x[on])), initial=0.0)
    gap_off = max(0.0, np.max(np.abs(g[~on]), initial=0.0) - eta1)
    return max(gap_on, gap_off)


@pytest.mark.parametrize("penalty", [L1(0.3), ElasticNet(0.3, 0.1)], ids=["l1", "en"])
def test_fixed_point_optimality(penalty):
    inst = _inst()
    st = bp_run(inst, penalty)
    eta2 = getattr(penalty, "eta2", 0.0)
    eta1 = getattr(penalty, "eta1", getattr(penalty, "eta", None))
    assert _subgradient_gap(inst, st.x_hat, eta1, eta2) < 1e-8
    np.testing.assert_allclose(st.x_hat, coord_descent(inst, penalty), atol=1e-6)


def test_batch_matches_single_runs():
    insts = [_inst(seed=s) for s in range(3)]
    A = np.stack([i.A for i in insts])
    Y = np.stack([i.y for i in insts])
    batch = bp_run_batch(A, Y, L1(0.3))
    for k, inst in enumerate(insts):
        single = bp_run(inst, L1(0.3))
        np.testing.assert_array_equal(batch.x_hat[k], single.x_hat)
        assert batch.iterations[k] == single.iterations


def test_shared_matrix_batch():
    inst = _inst()
    Y = np.stack([inst.y, -inst.y])
    st = bp_run_batch(inst.A, Y, L1(0.3))
    assert np.all(st.converged)
    np.testing.assert_allclose(st.x_hat[0], -st.x_hat[1], atol=1e-9)


def test_nonconvergence_keeps_state():
    with pytest.raises(NonConvergence) as info:
        bp_run(_inst(), L1(0.3), BPConfig(max_iter=3))
    assert isinstance(info.value.state, BPState)


def test_naive_variant_runs():
    st = bp_run_batch(_inst().A, _inst().y, L1(0.5), BPConfig(onsager=False, max_iter=2000))
    assert np.all(np.isfinite(st.x_hat))


def test_config_validation():
    with pytest.raises(ValueError):
        BPConfig(damping=0.0)
    with pytest.raises(ValueError):
        BPConfig(max_iter=0)


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        Instance(np.zeros((3, 4)), np.zeros(4))
    inst = _inst()
    with pytest.raises(DimensionMismatch):
        bp_step(BPState.zeros((), inst.M, inst.N + 1), inst.A, inst.y, L1(1.0))


def test_l2_not_supported():
    inst = _inst()
    with pytest.raises(TypeError):
        bp_step(BPState.zeros((), inst.M, inst.N), inst.A, inst.y, L2(1.0))


def test_sure_l1_counts_support():
    inst = _inst()
    st = bp_run(inst, L1(0.3))
    df = gdf_sure_fd(inst, L1(0.3), base=st)
    assert df == pytest.approx(np.count_nonzero(st.x_hat) / inst.M, abs=1e-4)


def test_covariance_identity_and_constant():
    rng = np.random.default_rng(0)
    S, M = 400, 20
    ys = [0.3 + rng.standard_normal(M) for _ in range(S)]
    tol = 3 / np.sqrt(S)
    assert abs(gdf_covariance([(y, y) for y in ys], 0.3, 1.0) - 1) <= tol
    assert abs(gdf_covariance([(y, np.full(M, 7.0)) for y in ys], 0.3, 1.0)) <= tol


def test_covariance_errors():
    with pytest.raises(TooFewSamples):
        gdf_covariance([(np.zeros(2), np.zeros(2))], 0, 1)
    with pytest.raises(DimensionMismatch):
        gdf_covariance([(np.zeros(2), np.zeros(3)), (np.zeros(2), np.zeros(3))], 0, 1)


def test_delta_eff_requires_converged():
    st = bp_run(_inst(), L1(0.3))
    assert 0 < delta_eff_bp([st]) < 1
    st.converged = False
    with pytest.raises(ValueError):
        delta_eff_bp([st])
    with pytest.raises(TooFewSamples):
        delta_eff_bp([])


def test_seeds_reproducible():
    assert sample_seeds(3, 4) == sample_seeds(3, 4)
    assert len(set(sample_seeds(3, 4))) == 4


def test_ensemble_reproducible():
    a = run_ensemble(L1(0.5), 20, 40, 6, seed=2, chunk=4)
    b = run_ensemble(L1(0.5), 20, 40, 6, seed=2, chunk=6)
    assert a.df_cov == b.df_cov and a.delta_eff == b.delta_eff
    assert a.convergence_rate == 1.0 and a.n_converged == 6
    assert 0 < a.mean_delta < 1


def test_scad_degenerate_member_is_not_converged():
    # tiny Qhat relative to eta/(a-1) leaves the concavity region
    inst = _inst(M=10, N=10)
    st = bp_run_batch(inst.A, inst.y[None], Scad(50.0, 3.0, 1.0), BPConfig(max_iter=50))
    assert not st.converged[0]
