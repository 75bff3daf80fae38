"""Domain types, errors and the Gaussian special-function layer.

All penalties are frozen dataclasses so they can be hashed, copied across
processes and used as dictionary keys in sweeps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from scipy import special

SQRT_PI = math.sqrt(math.pi)
SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)

# chi or Q above this value for several consecutive iterations marks a divergent branch
DIVERGENCE_LEVEL = 1e12


class GDFError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateScad(GDFError):
    """Qhat * (a - 1) <= eta: the SCAD single-body objective is not concave."""


class NonConvergence(GDFError):
    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class NotBracketed(GDFError):
    """The requested sparsity cannot be reached on the finite branch."""


class TooFewSamples(GDFError):
    pass


class DimensionMismatch(GDFError):
    pass


class TooLarge(GDFError):
    pass


class InvalidT(GDFError):
    pass


class NoMinimumInRange(GDFError):
    pass


def _check_finite(**kw):
    for name, v in kw.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v}")


@dataclass(frozen=True)
class L1:
    eta: float

    def __post_init__(self):
        _check_finite(eta=self.eta)
        if self.eta <= 0:
            raise ValueError("L1 eta must be positive")


@dataclass(frozen=True)
class ElasticNet:
    eta1: float
    eta2: float

    def __post_init__(self):
        _check_finite(eta1=self.eta1, eta2=self.eta2)
        if self.eta1 < 0 or self.eta2 < 0:
            raise ValueError("ElasticNet parameters must be non-negative")


@dataclass(frozen=True)
class L2:
    eta2: float

    def __post_init__(self):
        _check_finite(eta2=self.eta2)
        if self.eta2 <= 0:
            raise ValueError("L2 eta2 must be positive")


@dataclass(frozen=True)
class L0:
    eta: float

    def __post_init__(self):
        _check_finite(eta=self.eta)
        if self.eta <= 0:
            raise ValueError("L0 eta must be positive")


@dataclass(frozen=True)
class Scad:
    """SCAD penalty ``eta * p(|x|; a, lam)``.

    ``eta * lam * |x|`` near the origin, a concave quadratic on
    ``(lam, a*lam]`` and the constant ``eta*(a+1)*lam**2/2`` beyond.
    """

    eta: float
    a: float
    lam: float

    def __post_init__(self):
        _check_finite(eta=self.eta, a=self.a, lam=self.lam)
        if self.eta <= 0 or self.lam <= 0:
            raise ValueError("Scad eta and lam must be positive")
        if self.a <= 2:
            raise ValueError("Scad a must exceed 2")


Penalty = Union[L1, ElasticNet, L2, L0, Scad]

PENALTY_NAMES = {L1: "l1", ElasticNet: "en", L2: "l2", L0: "l0", Scad: "scad"}


def penalty_name(penalty: Penalty) -> str:
    return PENALTY_NAMES[type(penalty)]


def sparsity_parameter(penalty: Penalty) -> float:
    """The parameter that is tuned to reach a target sparsity."""
    if isinstance(penalty, ElasticNet):
        return penalty.eta1
    if isinstance(penalty, L2):
        return penalty.eta2
    return penalty.eta


def with_sparsity_parameter(penalty: Penalty, value: float) -> Penalty:
    if isinstance(penalty, ElasticNet):
        return replace(penalty, eta1=value)
    if isinstance(penalty, L2):
        return replace(penalty, eta2=value)
    return replace(penalty, eta=value)


@dataclass(frozen=True)
class ModelParams:
    """Ensemble parameters: sample ratio ``alpha = M/N`` and the data law."""

    alpha: float
    m_y: float = 0.0
    sigma_y2: float = 1.0

    def __post_init__(self):
        _check_finite(alpha=self.alpha, m_y=self.m_y, sigma_y2=self.sigma_y2)
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.sigma_y2 <= 0:
            raise ValueError("sigma_y2 must be positive")

    @property
    def second_moment(self) -> float:
        """E[y^2] = sigma_y2 + m_y^2."""
        return self.sigma_y2 + self.m_y**2


@dataclass(frozen=True)
class RSState:
    Q: float
    chi: float
    Qhat: float
    chihat: float

    @classmethod
    def from_order_params(cls, chi: float, Q: float, params: ModelParams) -> "RSState":
        """Fill in the conjugate variables from the regularisation-free equations."""
        Qhat = 1.0 / (1.0 + chi)
        chihat = (Q + params.second_moment) * Qhat**2
        return cls(Q=Q, chi=chi, Qhat=Qhat, chihat=chihat)


class Branch(str, enum.Enum):
    S1 = "S1"  # finite chi and Q
    S2 = "S2"  # chi divergent
    S3 = "S3"  # chi and Q divergent


@dataclass(frozen=True)
class RSSolution:
    """Result of the saddle-point solver.

    On divergent branches ``state`` is ``None`` (the divergence sentinel);
    nothing downstream does arithmetic with infinite order parameters.
    """

    state: RSState | None
    rho_hat: float
    branch: Branch
    rs_locally_stable: bool
    at_stable: bool
    converged: bool
    residual: float
    iterations: int = 0

    @property
    def divergent(self) -> bool:
        return self.branch is not Branch.S1

    @property
    def chi(self) -> float:
        return math.inf if self.state is None else self.state.chi


@dataclass(frozen=True)
class Observables:
    df: float
    err_train: float
    err_pre: float
    r_bar: float
    free_energy: float
    aic: float


def erfc(a):
    """Complementary error function ``2/sqrt(pi) * int_a^inf exp(-z^2) dz``."""
    if np.isscalar(a):
        return math.erfc(a) if math.isfinite(a) else (0.0 if a > 0 else 2.0)
    return special.erfc(a)


def gauss_density(z):
    return np.exp(-0.5 * np.square(z)) / SQRT_2PI


def tail_moments(u: float, v: float = math.inf) -> tuple[float, float, float]:
    """Two-sided moments of the standard Gaussian over ``u <= |z| < v``.

    Returns ``(int Dz, int |z| Dz, int z^2 Dz)`` restricted to the shell.
    """
    if v <= u:
        return 0.0, 0.0, 0.0
    phi_u = math.exp(-0.5 * u * u) / SQRT_2PI
    phi_v = 0.0 if math.isinf(v) else math.exp(-0.5 * v * v) / SQRT_2PI
    m0 = erfc(u / SQRT2) - erfc(v / SQRT2)
    m1 = 2.0 * (phi_u - phi_v)
    vphi_v = 0.0 if math.isinf(v) else v * phi_v
    m2 = 2.0 * (u * phi_u - vphi_v) + m0
    return m0, m1, m2
