"""Seeded generators for data vectors and predictor ensembles."""

from __future__ import annotations

import csv
import io

import numpy as np

from .core import InvalidT


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def gen_y(M: int, m_y: float, sigma_y2: float, seed) -> np.ndarray:
    """i.i.d. Gaussian data vector with mean ``m_y`` and variance ``sigma_y2``."""
    if M < 1:
        raise ValueError("M must be positive")
    return m_y + np.sqrt(sigma_y2) * _rng(seed).standard_normal(M)


def gen_gaussian_iid(M: int, N: int, seed) -> np.ndarray:
    """Entries i.i.d. N(0, 1/M), so that column norms concentrate at one."""
    return _rng(seed).standard_normal((M, N)) / np.sqrt(M)


def _normalize_columns(A: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    return A / norms


def ar1_rows(M: int, N: int, c: float, seed) -> np.ndarray:
    """Unnormalised rows that are stationary AR(1) sequences along the column index."""
    if not abs(c) < 1:
        raise ValueError("|c| must be below 1")
    z = _rng(seed).standard_normal((M, N))
    A = np.empty((M, N))
    A[:, 0] = z[:, 0]
    s = np.sqrt(1 - c * c)
    for i in range(1, N):
        A[:, i] = c * A[:, i - 1] + s * z[:, i]
    return A


def gen_example1(M: int, N: int, c: float, seed) -> np.ndarray:
    """Predictors with corr(A_i, A_j) = c^|i-j| and unit column norms."""
    return _normalize_columns(ar1_rows(M, N, c, seed))


def group_factor_columns(M: int, N: int, T: int, seed) -> np.ndarray:
    """Unnormalised predictors with three shared factors on the first 3T columns."""
    if T < 0 or (T > 0 and 3 * T >= N):
        raise InvalidT(f"need 3T < N, got T={T}, N={N}")
    rng = _rng(seed)
    A = rng.standard_normal((M, N))
    if T > 0:
        Z = rng.standard_normal((M, 3))
        for g in range(3):
            A[:, g * T:(g + 1) * T] += Z[:, [g]]
    return A


def gen_example2(M: int, N: int, T: int, seed) -> np.ndarray:
    """Three groups of T columns sharing a common factor; the rest independent."""
    return _normalize_columns(group_factor_columns(M, N, T, seed))


def gen_predictors(kind: str, M: int, N: int, seed) -> np.ndarray:
    """Dispatch on an ensemble tag: ``iid``, ``ex1:<c>`` or ``ex2:<T>``."""
    name, _, arg = kind.partition(":")
    if name == "iid":
        return gen_gaussian_iid(M, N, seed)
    if name == "ex1":
        return gen_example1(M, N, float(arg), seed)
    if name == "ex2":
        return gen_example2(M, N, int(arg), seed)
    raise ValueError(f"unknown ensemble {kind!r}")


def matrix_to_csv(A: np.ndarray, *, seed, generator: str) -> str:
    """Row-major CSV with a comment header recording shape, seed and generator."""
    M, N = A.shape
    buf = io.StringIO()
    buf.write(f"# M={M} N={N} seed={seed} generator={generator}\n")
    w = csv.writer(buf, lineterminator="\n")
    for row in A:
        w.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()
