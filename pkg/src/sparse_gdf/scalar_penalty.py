"""Closed forms of the effective single-body problem.

For a penalty ``r`` the single-body problem is

    x*(h; Qhat) = argmax_x  -Qhat x^2 / 2 + h x - r(x)

with the random field ``h = sqrt(chihat) z``, ``z ~ N(0, 1)``. Everything in
this module is a function of ``(Qhat, chihat)`` only; the ensemble ratio
``alpha`` is applied by the solver.

Thresholds are expressed on the ``theta`` scale: the estimate is non-zero
iff ``|z| > sqrt(2) * theta`` for the smallest threshold, so that the
fraction of non-zero components is ``erfc(theta)``.
"""

from __future__ import annotations

import math

import numpy as np

from .core import (
    SQRT_PI,
    DegenerateScad,
    ElasticNet,
    L0,
    L1,
    L2,
    Penalty,
    Scad,
    erfc,
)


def _scalar_or_array(x, scalar):
    return float(x) if scalar else x


def _check_scad(p: Scad, Qhat) -> None:
    if np.any(np.asarray(Qhat) * (p.a - 1.0) <= p.eta):
        raise DegenerateScad(
            f"Qhat*(a-1) <= eta for Scad(eta={p.eta}, a={p.a}); "
            "single-body objective is not concave"
        )


def penalty_value(penalty: Penalty, x):
    """r(x) evaluated elementwise."""
    ax = np.abs(np.asarray(x, dtype=float))
    if isinstance(penalty, L1):
        out = penalty.eta * ax
    elif isinstance(penalty, ElasticNet):
        out = penalty.eta1 * ax + 0.5 * penalty.eta2 * ax**2
    elif isinstance(penalty, L2):
        out = 0.5 * penalty.eta2 * ax**2
    elif isinstance(penalty, L0):
        out = penalty.eta * (ax != 0)
    elif isinstance(penalty, Scad):
        eta, a, lam = penalty.eta, penalty.a, penalty.lam
        mid = -eta * (ax**2 - 2 * a * lam * ax + lam**2) / (2 * (a - 1))
        out = np.where(
            ax <= lam,
            eta * lam * ax,
            np.where(ax <= a * lam, mid, eta * (a + 1) * lam**2 / 2),
        )
    else:
        raise TypeError(f"unknown penalty {penalty!r}")
    return _scalar_or_array(out, np.ndim(x) == 0)


def single_body_argmax(penalty: Penalty, h, Qhat):
    """Maximiser of ``-Qhat x^2/2 + h x - r(x)``; broadcasts over arrays.

    Exactly at a threshold the smaller-magnitude solution is returned.
    """
    scalar = np.ndim(h) == 0 and np.ndim(Qhat) == 0
    h = np.asarray(h, dtype=float)
    Qhat = np.asarray(Qhat, dtype=float)
    ah, sg = np.abs(h), np.sign(h)
    if isinstance(penalty, L1):
        x = sg * np.maximum(ah - penalty.eta, 0.0) / Qhat
    elif isinstance(penalty, ElasticNet):
        x = sg * np.maximum(ah - penalty.eta1, 0.0) / (Qhat + penalty.eta2)
    elif isinstance(penalty, L2):
        x = h / (Qhat + penalty.eta2)
    elif isinstance(penalty, L0):
        x = np.where(ah > np.sqrt(2.0 * penalty.eta * Qhat), h / Qhat, 0.0)
    elif isinstance(penalty, Scad):
        _check_scad(penalty, Qhat)
        eta, a, lam = penalty.eta, penalty.a, penalty.lam
        x = np.where(
            ah <= lam * eta,
            0.0,
            np.where(
                ah <= lam * (Qhat + eta),
                (h - lam * eta * sg) / Qhat,
                np.where(
                    ah <= a * lam * Qhat,
                    (h * (a - 1) - a * lam * eta * sg) / (Qhat * (a - 1) - eta),
                    h / Qhat,
                ),
            ),
        )
    else:
        raise TypeError(f"unknown penalty {penalty!r}")
    return _scalar_or_array(x, scalar)


def single_body_slope(penalty: Penalty, h, Qhat):
    """Piecewise derivative ``d x*/d h`` (the l0 jump carries no slope).

    This is the per-component variance rule used by message passing.
    """
    scalar = np.ndim(h) == 0 and np.ndim(Qhat) == 0
    ah = np.abs(np.asarray(h, dtype=float))
    Qhat = np.asarray(Qhat, dtype=float)
    if isinstance(penalty, L1):
        s = np.where(ah > penalty.eta, 1.0 / Qhat, 0.0)
    elif isinstance(penalty, ElasticNet):
        s = np.where(ah > penalty.eta1, 1.0 / (Qhat + penalty.eta2), 0.0)
    elif isinstance(penalty, L2):
        s = np.broadcast_to(1.0 / (Qhat + penalty.eta2), np.broadcast(ah, Qhat).shape).copy()
    elif isinstance(penalty, L0):
        s = np.where(ah > np.sqrt(2.0 * penalty.eta * Qhat), 1.0 / Qhat, 0.0)
    elif isinstance(penalty, Scad):
        _check_scad(penalty, Qhat)
        eta, a, lam = penalty.eta, penalty.a, penalty.lam
        middle = (lam * (Qhat + eta) < ah) & (ah <= a * lam * Qhat)
        outer = ((lam * eta < ah) & (ah <= lam * (Qhat + eta))) | (ah > a * lam * Qhat)
        s = np.where(middle, 1.0 / (Qhat - eta / (a - 1)), np.where(outer, 1.0 / Qhat, 0.0))
    else:
        raise TypeError(f"unknown penalty {penalty!r}")
    return _scalar_or_array(s, scalar)


def thresholds(penalty: Penalty, Qhat: float, chihat: float) -> tuple[float, ...]:
    if chihat <= 0:
        raise ValueError("chihat must be positive")
    scale = math.sqrt(2.0 * chihat)
    if isinstance(penalty, L1):
        return (penalty.eta / scale,)
    if isinstance(penalty, ElasticNet):
        return (penalty.eta1 / scale,)
    if isinstance(penalty, L2):
        return (0.0,)
    if isinstance(penalty, L0):
        return (math.sqrt(penalty.eta * Qhat / chihat),)
    if isinstance(penalty, Scad):
        _check_scad(penalty, Qhat)
        lam, eta = penalty.lam, penalty.eta
        return (
            lam * eta / scale,
            lam * (Qhat + eta) / scale,
            penalty.a * lam * Qhat / scale,
        )
    raise TypeError(f"unknown penalty {penalty!r}")


def rho_hat(penalty: Penalty, Qhat: float, chihat: float) -> float:
    """Fraction of non-zero components, ``erfc`` of the support threshold."""
    return erfc(thresholds(penalty, Qhat, chihat)[0])


def omega(theta0: float) -> float:
    """Weight of the hard-threshold jump: ``2 theta0 exp(-theta0^2) / sqrt(pi)``."""
    if theta0 < 0:
        raise ValueError("theta0 must be non-negative")
    return 2.0 * theta0 * math.exp(-theta0 * theta0) / SQRT_PI


def _tau(theta: float) -> float:
    # int_{|z|>sqrt2 theta} (|z| - sqrt2 theta)^2 Dz
    return (1 + 2 * theta**2) * erfc(theta) - omega(theta)


def _scad_parts(p: Scad, Qhat: float, chihat: float) -> dict:
    t1, t2, t3 = thresholds(p, Qhat, chihat)
    eta, a = p.eta, p.a
    ep = eta / (a - 1)
    rho = erfc(t1)
    pi4 = erfc(t2) - erfc(t3)
    e1, e2, e3 = math.exp(-t1 * t1), math.exp(-t2 * t2), math.exp(-t3 * t3)
    pi1 = (chihat / Qhat) * (
        -(2 * t1 / SQRT_PI) * (e1 + (Qhat - eta) / eta * e2)
        + (1 + 2 * t1**2) * (rho - erfc(t2))
    )
    k = eta / (Qhat * (a - 1))
    pi2 = (chihat / (Qhat - ep)) * (
        (2 / SQRT_PI) * ((t2 - 2 * t3 * k) * e2 - (1 - 2 * k) * t3 * e3)
        + (1 + 2 * (k * t3) ** 2) * pi4
    )
    pi3 = (chihat / Qhat) * ((2 * t3 / SQRT_PI) * e3 + erfc(t3))
    return dict(t1=t1, t2=t2, t3=t3, ep=ep, rho=rho, pi1=pi1, pi2=pi2, pi3=pi3, pi4=pi4)


def pi_value(penalty: Penalty, Qhat: float, chihat: float) -> float:
    """``2 * int Dz log g(sqrt(chihat) z, Qhat)`` in closed form."""
    if isinstance(penalty, L1):
        (t,) = thresholds(penalty, Qhat, chihat)
        return chihat / Qhat * _tau(t)
    if isinstance(penalty, ElasticNet):
        (t,) = thresholds(penalty, Qhat, chihat)
        return chihat / (Qhat + penalty.eta2) * _tau(t)
    if isinstance(penalty, L2):
        return chihat / (Qhat + penalty.eta2)
    if isinstance(penalty, L0):
        (t,) = thresholds(penalty, Qhat, chihat)
        return chihat / Qhat * (omega(t) + (1 - 2 * t * t) * erfc(t))
    if isinstance(penalty, Scad):
        s = _scad_parts(penalty, Qhat, chihat)
        eta, a, lam = penalty.eta, penalty.a, penalty.lam
        return (
            s["pi1"] + s["pi2"] + s["pi3"]
            + eta * lam**2 * s["pi4"] / (a - 1)
            - eta * (a + 1) * lam**2 * erfc(s["t3"])
        )
    raise TypeError(f"unknown penalty {penalty!r}")


def chi_contrib(penalty: Penalty, Qhat: float, chihat: float) -> float:
    """``alpha * chi`` = ``d pi / d chihat`` = ``E[d x*/d h]``."""
    if isinstance(penalty, L1):
        return rho_hat(penalty, Qhat, chihat) / Qhat
    if isinstance(penalty, ElasticNet):
        return rho_hat(penalty, Qhat, chihat) / (Qhat + penalty.eta2)
    if isinstance(penalty, L2):
        return 1.0 / (Qhat + penalty.eta2)
    if isinstance(penalty, L0):
        (t,) = thresholds(penalty, Qhat, chihat)
        return (omega(t) + erfc(t)) / Qhat
    if isinstance(penalty, Scad):
        s = _scad_parts(penalty, Qhat, chihat)
        ep = s["ep"]
        return (s["rho"] + ep / (Qhat - ep) * s["pi4"]) / Qhat
    raise TypeError(f"unknown penalty {penalty!r}")


def q_contrib(penalty: Penalty, Qhat: float, chihat: float) -> float:
    """``alpha * Q`` = ``-d pi / d Qhat`` = ``E[x*^2]``."""
    if isinstance(penalty, L1):
        (t,) = thresholds(penalty, Qhat, chihat)
        return chihat * _tau(t) / Qhat**2
    if isinstance(penalty, ElasticNet):
        (t,) = thresholds(penalty, Qhat, chihat)
        return chihat * _tau(t) / (Qhat + penalty.eta2) ** 2
    if isinstance(penalty, L2):
        return chihat / (Qhat + penalty.eta2) ** 2
    if isinstance(penalty, L0):
        (t,) = thresholds(penalty, Qhat, chihat)
        return chihat / Qhat**2 * (omega(t) + erfc(t))
    if isinstance(penalty, Scad):
        s = _scad_parts(penalty, Qhat, chihat)
        return s["pi1"] / Qhat + s["pi2"] / (Qhat - s["ep"]) + s["pi3"] / Qhat
    raise TypeError(f"unknown penalty {penalty!r}")


def slope_square_mean(penalty: Penalty, Qhat: float, chihat: float) -> float:
    """``E[(d x*/d h)^2]``; infinite for l0 because of the jump."""
    if isinstance(penalty, L1):
        return rho_hat(penalty, Qhat, chihat) / Qhat**2
    if isinstance(penalty, ElasticNet):
        return rho_hat(penalty, Qhat, chihat) / (Qhat + penalty.eta2) ** 2
    if isinstance(penalty, L2):
        return 1.0 / (Qhat + penalty.eta2) ** 2
    if isinstance(penalty, L0):
        return math.inf
    if isinstance(penalty, Scad):
        s = _scad_parts(penalty, Qhat, chihat)
        return s["rho"] / Qhat**2 + ((Qhat - s["ep"]) ** -2 - Qhat**-2) * s["pi4"]
    raise TypeError(f"unknown penalty {penalty!r}")
