"""Numeric primitives shared by the simulators, summaries and diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import special

from .errors import (
    BadProbabilityError,
    EmptySampleError,
    InsufficientDataError,
    SingularMatrixError,
)
from .rng import SeedPath, as_seed

COND_LIMIT = 1e12
RIDGE_SCALE = 1e-8

Provenance = Literal["plug-in", "bootstrap", "analytic"]


def quantile(sample, p: float) -> float:
    """Type-7 sample quantile (linear interpolation between order statistics)."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise EmptySampleError("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise BadProbabilityError(f"p={p} outside [0, 1]")
    return float(np.quantile(x, p, method="linear"))


def row_quantiles(a: np.ndarray, probs) -> np.ndarray:
    """Type-7 quantiles of every row of ``a``; returns shape (rows, len(probs)).

    Only the order statistics needed for interpolation are partitioned, which
    is several times cheaper than sorting whole rows.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    h = (n - 1) * np.asarray(probs, dtype=float)
    lo = np.floor(h).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    kth = np.unique(np.concatenate([lo, hi]))
    part = np.partition(a, kth, axis=-1)
    frac = h - lo
    return part[..., lo] + frac * (part[..., hi] - part[..., lo])


def chi2_quantile(dof: int, prob: float) -> float:
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if not 0.0 <= prob < 1.0:
        raise BadProbabilityError(f"prob={prob} outside [0, 1)")
    if prob == 0.0:
        return 0.0
    return float(2.0 * special.gammaincinv(dof / 2.0, prob))


def chi2_cdf(x: float, dof: int) -> float:
    if x <= 0:
        return 0.0
    return float(special.gammainc(dof / 2.0, x / 2.0))


def stabilize(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Apply the ridge policy to a symmetric matrix.

    Matrices with condition number above ``COND_LIMIT`` get
    ``RIDGE_SCALE * trace / dim`` added to the diagonal. Returns the (possibly)
    modified matrix and the ridge added.
    """
    m = np.asarray(matrix, dtype=float)
    cond = np.linalg.cond(m) if m.size else 0.0
    if np.isfinite(cond) and cond <= COND_LIMIT:
        return m, 0.0
    ridge = RIDGE_SCALE * float(np.trace(m)) / m.shape[0]
    if ridge <= 0:
        return m, 0.0
    return m + ridge * np.eye(m.shape[0]), ridge


def solve_stable(matrix: np.ndarray, rhs: np.ndarray, what: str = "matrix") -> np.ndarray:
    m, _ = stabilize(matrix)
    if not np.isfinite(np.linalg.cond(m)):
        raise SingularMatrixError(f"{what} is singular beyond ridge")
    try:
        return np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"{what} is singular beyond ridge") from exc


def ols_fit(X, y) -> np.ndarray:
    """Least-squares coefficients of ``y`` on the columns of ``X`` (no intercept added)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if n < p:
        raise SingularMatrixError(f"n={n} < p={p}")
    xtx = X.T @ X
    cond = np.linalg.cond(xtx)
    if np.isfinite(cond) and cond <= COND_LIMIT:
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        return coef
    return solve_stable(xtx, X.T @ y, what="design")


def autocorrelation(series, lag: int) -> tuple[float, bool]:
    """Sample autocorrelation at ``lag`` (denominator T for both moments).

    Returns ``(value, degenerate)``; a constant series gives ``(0.0, True)``.
    """
    x = np.asarray(series, dtype=float).ravel()
    if lag < 0 or x.size <= lag:
        raise ValueError("need 0 <= lag < len(series)")
    values, degenerate = acf_rows(x[None, :], lag)
    if lag == 0:
        return (0.0, True) if degenerate[0] else (1.0, False)
    return float(values[0, lag - 1]), bool(degenerate[0])


def acf_rows(a: np.ndarray, max_lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Autocorrelations at lags 1..max_lag for every row.

    Returns ``(acf, degenerate)`` with shapes (rows, max_lag) and (rows,).
    Constant rows get zeros and a True flag.
    """
    a = np.asarray(a, dtype=float)
    T = a.shape[-1]
    c = a - a.mean(axis=-1, keepdims=True)
    var = np.einsum("ij,ij->i", c, c) / T
    degenerate = a.max(axis=-1) == a.min(axis=-1)
    out = np.zeros((a.shape[0], max_lag))
    safe = np.where(degenerate, 1.0, var)
    for lag in range(1, max_lag + 1):
        cov = np.einsum("ij,ij->i", c[:, lag:], c[:, :-lag]) / T
        out[:, lag - 1] = np.where(degenerate, 0.0, cov / safe)
    return out, degenerate


@dataclass(frozen=True)
class VarianceEstimate:
    """Estimate of the limiting covariance of root-n scaled summaries."""

    matrix: np.ndarray
    provenance: Provenance
    ridge_applied: float = 0.0
    degenerate: bool = False

    @classmethod
    def build(cls, matrix, provenance: Provenance, degenerate: bool = False) -> "VarianceEstimate":
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        m = 0.5 * (m + m.T)
        m, ridge = stabilize(m)
        return cls(matrix=m, provenance=provenance, ridge_applied=ridge, degenerate=degenerate)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def plugin_variance(per_obs_summaries) -> VarianceEstimate:
    s = np.asarray(per_obs_summaries, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    n = s.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    c = s - s.mean(axis=0)
    return VarianceEstimate.build(c.T @ c / n, "plug-in")


def block_length(n: int) -> int:
    return max(1, math.ceil(round(n ** (1.0 / 3.0), 9)))


def bootstrap_indices(n: int, B: int, scheme: str, rng: np.random.Generator) -> np.ndarray:
    """Resampling index matrix of shape (B, n)."""
    if scheme == "iid":
        return rng.integers(0, n, size=(B, n))
    if scheme == "moving-block":
        ell = min(block_length(n), n)
        n_blocks = math.ceil(n / ell)
        starts = rng.integers(0, n - ell + 1, size=(B, n_blocks))
        idx = (starts[:, :, None] + np.arange(ell)[None, None, :]).reshape(B, -1)
        return idx[:, :n]
    raise ValueError(f"unknown bootstrap scheme {scheme!r}")


def bootstrap_variance(
    data,
    summary_fn: Callable[[np.ndarray], np.ndarray],
    B: int,
    scheme: str,
    seed: SeedPath | int,
) -> VarianceEstimate:
    """n times the covariance of the summary map across B bootstrap resamples.

    ``data`` is indexed by observation along its first axis; 2-D data (e.g.
    regressor/response pairs) is resampled row-wise.
    """
    if B < 2:
        raise ValueError("B must be >= 2")
    arr = np.asarray(data)
    n = arr.shape[0]
    idx = bootstrap_indices(n, B, scheme, as_seed(seed).generator())
    stats = np.array([np.atleast_1d(summary_fn(arr[row])) for row in idx], dtype=float)
    cov = np.atleast_2d(np.cov(stats, rowvar=False, ddof=1))
    if not np.any(cov):
        return VarianceEstimate(np.zeros_like(cov), "bootstrap", 0.0, degenerate=True)
    return VarianceEstimate.build(n * cov, "bootstrap")
