"""Finite-size belief propagation (AMP) for regularised least squares.

The update works on stacked arrays: ``A`` has shape ``(..., M, N)`` (or a
single ``(M, N)`` matrix shared by every batch member) and all per-sample
vectors carry the same leading batch shape. One instance is the special
case of an empty batch shape, so the ensemble runners and the single
instance API share the same code path.

Two variants of the output-side update are available:

* ``onsager=True`` (default): ``p = A x - sigma2 * R_old`` and
  ``sigma2 = sum_i A^2 chi_i``. Fixed points satisfy the optimality
  conditions of the regularised least-squares problem.
* ``onsager=False``: the naive form ``p = A x`` with
  ``sigma2 = (1/alpha) sum_i A^2 chi_i``; kept for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DimensionMismatch,
    ElasticNet,
    L0,
    L1,
    NonConvergence,
    Penalty,
    Scad,
    TooFewSamples,
)
from .datagen import gen_predictors, gen_y
from .scalar_penalty import single_body_argmax, single_body_slope


@dataclass(frozen=True)
class Instance:
    A: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        A, y = np.asarray(self.A, dtype=float), np.asarray(self.y, dtype=float)
        if A.ndim != 2 or y.ndim != 1 or A.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"A {A.shape} and y {y.shape} are inconsistent")
        if not np.all(np.isfinite(A)):
            raise ValueError("A has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class BPConfig:
    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 100_000
    onsager: bool = True

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class BPState:
    """Message-passing state.

    ``chi`` holds the penalty's variance rule evaluated at the current
    fields; ``chi_bar`` is its damped running value that feeds ``sigma2``.
    """

    x_hat: np.ndarray
    chi: np.ndarray
    chi_bar: np.ndarray
    h: np.ndarray
    Qhat: np.ndarray
    R: np.ndarray
    sigma2: np.ndarray
    iter: int = 0
    converged: np.ndarray | bool = False
    iterations: np.ndarray | int = 0

    @classmethod
    def zeros(cls, batch: tuple, M: int, N: int) -> "BPState":
        zN, zM = np.zeros(batch + (N,)), np.zeros(batch + (M,))
        return cls(zN, zN.copy(), zN.copy(), zN.copy(), np.ones(batch + (N,)), zM, zM.copy())


_SUPPORTED = (L1, ElasticNet, L0, Scad)


def _matvec(A, x):
    return (A @ x[..., None])[..., 0]


def _rmatvec(A, r):
    return (np.swapaxes(A, -1, -2) @ r[..., None])[..., 0]


def bp_step(
    state: BPState,
    A: np.ndarray,
    y: np.ndarray,
    penalty: Penalty,
    damping: float = 0.5,
    *,
    onsager: bool = True,
    A2: np.ndarray | None = None,
) -> BPState:
    """One synchronous sweep: output messages from the previous estimates, then new estimates."""
    if not isinstance(penalty, _SUPPORTED):
        raise TypeError(f"message passing does not support {penalty!r}")
    M, N = A.shape[-2:]
    if y.shape[-1] != M or state.x_hat.shape[-1] != N:
        raise DimensionMismatch("state, A and y dimensions do not match")
    A2 = A * A if A2 is None else A2
    scale = 1.0 if onsager else N / M  # the naive form carries 1/alpha
    sigma2 = scale * _matvec(A2, state.chi_bar)
    p = _matvec(A, state.x_hat)
    if onsager:
        p = p - sigma2 * state.R
    R = (y - p) / (1 + sigma2)
    w = 1.0 / (1 + sigma2)
    Qhat = _rmatvec(A2, w)
    h = state.x_hat * Qhat + _rmatvec(A, R)
    bad = None
    if isinstance(penalty, Scad):
        # a non-concave single-body problem poisons the whole member
        floor = penalty.eta / (penalty.a - 1)
        bad = np.any(Qhat <= floor, axis=-1)
        if np.any(bad):
            Qhat = np.where(Qhat <= floor, 2 * floor, Qhat)
    x_new = single_body_argmax(penalty, h, Qhat)
    chi_new = single_body_slope(penalty, h, Qhat)
    if bad is not None and np.any(bad):
        x_new = np.where(bad[..., None], np.nan, x_new)
    g = damping
    return BPState(
        x_hat=(1 - g) * state.x_hat + g * x_new,
        chi=np.asarray(chi_new, dtype=float),
        chi_bar=(1 - g) * state.chi_bar + g * chi_new,
        h=h,
        Qhat=Qhat,
        R=R,
        sigma2=sigma2,
        iter=state.iter + 1,
        converged=state.converged,
        iterations=state.iterations,
    )


def bp_run_batch(
    A: np.ndarray,
    Y: np.ndarray,
    penalty: Penalty,
    config: BPConfig = BPConfig(),
    init: BPState | None = None,
) -> BPState:
    """Iterate every batch member until ``max|dx| < tol`` or ``max_iter``.

    Finished members are frozen and dropped from the working set, so each
    member ends in the same state it would reach if run alone. Converged
    members report ``x_hat`` as the undamped single-body estimate.
    """
    Y = np.asarray(Y, dtype=float)
    batch = Y.shape[:-1]
    M, N = A.shape[-2:]
    st = BPState.zeros(batch, M, N) if init is None else init
    if batch == ():
        out = bp_run_batch(A, Y[None], penalty, config, _stack([st]))
        return _unstack(out, 0, out.converged[0], out.iterations[0])
    if len(batch) != 1:
        raise DimensionMismatch("only one batch dimension is supported")
    shared = A.ndim == 2
    final = {f: np.array(getattr(st, f), dtype=float) for f in _FIELDS}
    conv = np.zeros(batch, dtype=bool)
    iters = np.zeros(batch, dtype=int)
    idx = np.arange(batch[0])
    cur = BPState(*(final[f] for f in _FIELDS))
    A_act, A2_act, Y_act = A, A * A, Y
    for it in range(1, config.max_iter + 1):
        new = bp_step(cur, A_act, Y_act, penalty, config.damping, onsager=config.onsager, A2=A2_act)
        with np.errstate(invalid="ignore"):
            dx = np.max(np.abs(new.x_hat - cur.x_hat), axis=-1)
        cur = new
        iters[idx] = it
        ok = dx < config.tol
        fin = ok | ~np.isfinite(dx)
        if it == config.max_iter:
            fin[:] = True
        if np.any(fin):
            for f in _FIELDS:
                final[f][idx[fin]] = getattr(cur, f)[fin]
            if np.any(ok):
                # report the undamped rule value: same fixed point, exact zeros
                final["x_hat"][idx[ok]] = single_body_argmax(penalty, cur.h[ok], cur.Qhat[ok])
            conv[idx[fin]] = ok[fin]
            keep = ~fin
            idx = idx[keep]
            if idx.size == 0:
                break
            cur = BPState(*(getattr(cur, f)[keep] for f in _FIELDS), iter=it)
            Y_act = Y_act[keep]
            if not shared:
                A_act, A2_act = A_act[keep], A2_act[keep]
    return BPState(*(final[f] for f in _FIELDS), iter=int(iters.max(initial=0)), converged=conv, iterations=iters)


_FIELDS = ("x_hat", "chi", "chi_bar", "h", "Qhat", "R", "sigma2")


def _stack(states):
    return BPState(*(np.stack([getattr(s, f) for s in states]) for f in _FIELDS))


def _unstack(st: BPState, k: int, converged, iterations) -> BPState:
    return BPState(*(getattr(st, f)[k] for f in _FIELDS),
                   iter=int(iterations), converged=bool(converged), iterations=int(iterations))


def bp_run(inst: Instance, penalty: Penalty, config: BPConfig = BPConfig(), init: BPState | None = None) -> BPState:
    """Run message passing on one instance; raises NonConvergence with the last state."""
    st = bp_run_batch(inst.A, inst.y, penalty, config, init)
    if not st.converged:
        raise NonConvergence(f"message passing did not converge in {config.max_iter} iterations", state=st)
    return st


# ---------------------------------------------------------------------------
# GDF estimators


def gdf_covariance(ensemble, m_y: float, sigma_y2: float) -> float:
    """Covariance estimate of df from ``(y, y_hat)`` pairs of independent draws.

    ``m_y`` is the known data mean; ``y_hat`` is centred at its sample mean.
    """
    pairs = list(ensemble)
    if len(pairs) < 2:
        raise TooFewSamples("the covariance estimator needs at least two samples")
    Y = np.array([p[0] for p in pairs], dtype=float)
    Yh = np.array([p[1] for p in pairs], dtype=float)
    if Y.shape != Yh.shape:
        raise DimensionMismatch("y and y_hat must have equal length in every sample")
    S, M = Y.shape
    return float(np.sum((Y - m_y) * (Yh - Yh.mean(axis=0))) / (S * M * sigma_y2))


def gdf_sure_fd(
    inst: Instance,
    penalty: Penalty,
    config: BPConfig = BPConfig(),
    eps: float = 1e-6,
    base: BPState | None = None,
) -> float:
    """One-sided finite-difference divergence ``(1/M) sum_mu d y_hat_mu / d y_mu``.

    All ``M`` perturbed problems are solved together, warm-started from the
    unperturbed fixed point.
    """
    base = bp_run(inst, penalty, config) if base is None else base
    M = inst.M
    Y = inst.y[None, :] + eps * np.eye(M)
    init = _stack([base] * M)
    st = bp_run_batch(inst.A, Y, penalty, config, init)
    if not np.all(st.converged):
        raise NonConvergence(f"{int(np.sum(~st.converged))} perturbed solves did not converge", state=st)
    yh0 = inst.A @ base.x_hat
    yh = st.x_hat @ inst.A.T
    return float(np.mean((np.diagonal(yh) - yh0) / eps))


def delta_eff_bp(states) -> float:
    """Effective fraction of non-zero components at converged fixed points.

    ``mean_s[(1/M) sum_i chi_i] * mean_s[(1/N) sum_i Qhat_i]``. The variance
    sum is taken per sample so that the value is on the scale of df.
    """
    states = list(states)
    if not states:
        raise TooFewSamples("need at least one converged state")
    if any(not np.all(s.converged) for s in states):
        raise ValueError("all ensemble members must be converged")
    M = np.shape(states[0].R)[-1]
    chi = np.concatenate([np.reshape(s.chi, (-1, np.shape(s.chi)[-1])) for s in states])
    Qh = np.concatenate([np.reshape(s.Qhat, (-1, np.shape(s.Qhat)[-1])) for s in states])
    return float(np.mean(chi.sum(axis=-1) / M) * np.mean(Qh))


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleResult:
    df_cov: float
    delta_eff: float
    mean_delta: float
    convergence_rate: float
    mean_iterations: float
    n_converged: int
    df_sure: float = float("nan")
    extra: dict = field(default_factory=dict)


def sample_seeds(seed: int, S: int) -> list[tuple[int, int]]:
    """Independent (predictor, data) seeds per realisation."""
    kids = np.random.SeedSequence(seed).spawn(S)
    return [tuple(int(v) for v in k.generate_state(2)) for k in kids]


def draw_instance(M: int, N: int, ensemble: str, m_y: float, sigma_y2: float, seeds: tuple[int, int]) -> Instance:
    return Instance(gen_predictors(ensemble, M, N, seeds[0]), gen_y(M, m_y, sigma_y2, seeds[1]))


def run_ensemble(
    penalty: Penalty,
    M: int,
    N: int,
    S: int,
    *,
    ensemble: str = "iid",
    m_y: float = 0.0,
    sigma_y2: float = 1.0,
    seed: int = 0,
    config: BPConfig = BPConfig(),
    chunk: int = 50,
    sure_samples: int = 0,
) -> EnsembleResult:
    """BP on ``S`` fresh ``(A, y)`` draws; df estimators over converged members.

    ``sure_samples`` > 0 adds the finite-difference estimate averaged over
    that many converged members.
    """
    if S < 1:
        raise TooFewSamples("S must be positive")
    seeds = sample_seeds(seed, S)
    pairs, states, deltas, iters, conv, sure = [], [], [], [], [], []
    for start in range(0, S, chunk):
        insts = [draw_instance(M, N, ensemble, m_y, sigma_y2, s) for s in seeds[start:start + chunk]]
        A = np.stack([i.A for i in insts])
        Y = np.stack([i.y for i in insts])
        st = bp_run_batch(A, Y, penalty, config)
        for k, inst in enumerate(insts):
            iters.append(int(st.iterations[k]))
            ok = bool(st.converged[k])
            conv.append(ok)
            if not ok:
                continue
            x = st.x_hat[k]
            pairs.append((inst.y, inst.A @ x))
            deltas.append(np.count_nonzero(st.chi[k]) / M)
            member = _unstack(st, k, True, st.iterations[k])
            states.append(member)
            if len(sure) < sure_samples:
                sure.append(gdf_sure_fd(inst, penalty, config, sigma_y2**0.5 * 1e-6, base=member))
    n = len(pairs)
    df_cov = gdf_covariance(pairs, m_y, sigma_y2) if n >= 2 else float("nan")
    return EnsembleResult(
        df_cov=df_cov,
        delta_eff=delta_eff_bp(states) if states else float("nan"),
        mean_delta=float(np.mean(deltas)) if deltas else float("nan"),
        convergence_rate=float(np.mean(conv)),
        mean_iterations=float(np.mean(iters)),
        n_converged=n,
        df_sure=float(np.mean(sure)) if sure else float("nan"),
    )
