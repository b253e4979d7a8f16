"""Summary-statistic maps for each benchmark model.

Every map has a single-dataset form and a ``*_rows`` form that summarises a
matrix of datasets (one per row). Row forms return NaN rows where the
single-dataset form would raise, so the ABC engine can resimulate them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpreadError
from .numerics import acf_rows, row_quantiles

OCTILES = np.arange(1, 8) / 8.0


@dataclass(frozen=True)
class SummarySpec:
    name: str
    k_eta: int
    labels: tuple[str, ...]
    per_obs_available: bool
    scalar_pp_index: int

    def __post_init__(self):
        if len(self.labels) != self.k_eta or not 0 <= self.scalar_pp_index < self.k_eta:
            raise ValueError("inconsistent summary spec")


NORMAL_SPEC = SummarySpec("normal", 2, ("mean", "var"), True, 1)
GK_REGRESSION_SPEC = SummarySpec(
    "gk-regression", 4, ("slope", "iqr", "robust_skew", "robust_kurt"), False, 0
)
RICKER_SPEC = SummarySpec(
    "ricker",
    9,
    ("acf1", "acf2", "acf3", "acf4", "acf5", "beta1", "beta2", "mean", "zeros"),
    False,
    8,
)
RETURNS_SPEC = SummarySpec(
    "returns",
    12,
    tuple(f"octile{i}" for i in range(1, 8))
    + ("iqr", "robust_skew", "robust_kurt", "acf1", "acf2"),
    False,
    10,
)


def _single(rows_fn, *arrays):
    out = rows_fn(*(np.asarray(a, dtype=float)[None, :] for a in arrays))[0]
    if not np.all(np.isfinite(out)):
        raise DegenerateSpreadError("inter-quartile range is zero")
    return out


# -- normal ---------------------------------------------------------------


def normal_per_obs(y) -> np.ndarray:
    """Per-observation contributions whose column means equal the summaries."""
    y = np.asarray(y, dtype=float)
    return np.column_stack([y, (y - y.mean()) ** 2])


def summaries_normal(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise ValueError("need n >= 2")
    return np.array([y.mean(), np.mean((y - y.mean()) ** 2)])


def normal_rows(y: np.ndarray) -> np.ndarray:
    mean = y.mean(axis=1)
    return np.column_stack([mean, np.mean((y - mean[:, None]) ** 2, axis=1)])


# -- robust quantile shape (shared by g-and-k regression and returns) -------


def _robust_shape(octiles: np.ndarray):
    e1, l1, e3, l2, e5, l3, e7 = octiles.T
    iqr = l3 - l1
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(iqr > 0, (l3 + l1 - 2 * l2) / iqr, np.nan)
        kurt = np.where(iqr > 0, (e7 - e5 + e3 - e1) / iqr, np.nan)
    return np.where(iqr > 0, iqr, np.nan), skew, kurt


# -- g-and-k regression ------------------------------------------------------


def gk_regression_rows(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``x`` has shape (n,) or (m, n); ``y`` has shape (m, n)."""
    x = np.broadcast_to(x, y.shape)
    slope = np.einsum("ij,ij->i", x, y) / np.einsum("ij,ij->i", x, x)
    resid = y - slope[:, None] * x
    iqr, skew, kurt = _robust_shape(row_quantiles(resid, OCTILES))
    return np.column_stack([slope, iqr, skew, kurt])


def summaries_gk_regression(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 8:
        raise ValueError("x and y must have equal length >= 8")
    return _single(gk_regression_rows, x, y)


def gk_regression_pairs(xy) -> np.ndarray:
    """Summaries of an (n, 2) array of (x, y) pairs; used by the pairs bootstrap."""
    xy = np.asarray(xy, dtype=float)
    return summaries_gk_regression(xy[:, 0], xy[:, 1])


# -- Ricker ------------------------------------------------------------------


def ricker_rows(y: np.ndarray, return_flags: bool = False):
    y = np.asarray(y, dtype=float)
    acf, degenerate = acf_rows(y, 5)
    p3 = y**0.3
    resp, x1 = p3[:, 1:], p3[:, :-1]
    x2 = x1 * x1
    # Closed-form 2x2 normal equations; no intercept.
    s11 = np.einsum("ij,ij->i", x1, x1)
    s12 = np.einsum("ij,ij->i", x1, x2)
    s22 = np.einsum("ij,ij->i", x2, x2)
    r1 = np.einsum("ij,ij->i", x1, resp)
    r2 = np.einsum("ij,ij->i", x2, resp)
    beta, singular = _solve_2x2(s11, s12, s22, r1, r2)
    out = np.column_stack([acf, beta, y.mean(axis=1), (y == 0).sum(axis=1)])
    if return_flags:
        return out, degenerate | singular
    return out


def _solve_2x2(s11, s12, s22, r1, r2):
    """Batched symmetric 2x2 solve with the ridge policy of ``numerics.stabilize``.

    An all-zero design (e.g. an all-zero count series) has nothing to ridge
    against; its minimum-norm solution, zero, is returned and flagged.
    """
    tr = s11 + s22
    det = s11 * s22 - s12 * s12
    disc = np.sqrt(np.maximum((s11 - s22) ** 2 + 4 * s12 * s12, 0.0))
    lam_max = 0.5 * (tr + disc)
    lam_min = 0.5 * (tr - disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lam_min > 0, lam_max / lam_min, np.inf)
    ridge = np.where(cond > 1e12, 1e-8 * tr / 2.0, 0.0)
    a11, a22 = s11 + ridge, s22 + ridge
    det = a11 * a22 - s12 * s12
    singular = ~(det > 0)
    safe = np.where(singular, 1.0, det)
    b1 = np.where(singular, 0.0, (a22 * r1 - s12 * r2) / safe)
    b2 = np.where(singular, 0.0, (a11 * r2 - s12 * r1) / safe)
    return np.column_stack([b1, b2]), singular


def summaries_ricker(y, return_flag: bool = False):
    y = np.asarray(y, dtype=float)
    if y.size < 7:
        raise ValueError("need T >= 7")
    out, flags = ricker_rows(y[None, :], return_flags=True)
    return (out[0], bool(flags[0])) if return_flag else out[0]


# -- returns -------------------------------------------------------------------


def returns_rows(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    octiles = row_quantiles(y, OCTILES)
    iqr, skew, kurt = _robust_shape(octiles)
    acf, _ = acf_rows(y, 2)
    return np.column_stack([octiles, iqr, skew, kurt, acf])


def summaries_returns(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.size < 8:
        raise ValueError("need T >= 8")
    return _single(returns_rows, y)
