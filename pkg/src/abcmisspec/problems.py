"""Inference problems: prior + simulator + summary map bundled as a ModelSpec.

Builders exist for the four benchmark models under their *assumed*
(correctly specified) form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from . import summaries as S
from .models import gk_quantile, ma1_latent, ricker_batch
from .rng import standard_normal, uniform


@dataclass(frozen=True)
class UniformPrior:
    """Independent uniform prior on a box."""

    lows: tuple[float, ...]
    highs: tuple[float, ...]

    def __post_init__(self):
        if len(self.lows) != len(self.highs) or any(h <= l for l, h in zip(self.lows, self.highs)):
            raise ValueError("prior bounds must be non-empty intervals")

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        lo = np.asarray(self.lows)
        hi = np.asarray(self.highs)
        return lo + (hi - lo) * uniform(rng, (m, lo.size))


@dataclass(frozen=True)
class ModelSpec:
    """Everything the ABC engine and the diagnostics need about one problem.

    ``simulate_summaries(thetas, n, rng)`` maps an (m, k_theta) parameter
    matrix to an (m, k_eta) summary matrix, one size-``n`` pseudo-dataset per
    row, with NaN rows marking failed simulations. ``simulate_data`` and
    ``summarize`` are the single-dataset route used for observed data,
    bootstraps and tests.
    """

    name: str
    param_names: tuple[str, ...]
    summary: S.SummarySpec
    prior: UniformPrior
    simulate_summaries: Callable[[np.ndarray, int, np.random.Generator], np.ndarray]
    simulate_data: Callable[[np.ndarray, int, np.random.Generator], Any]
    summarize: Callable[[Any], np.ndarray]
    bootstrap_scheme: str = "iid"
    per_obs: Callable[[Any], np.ndarray] | None = None
    analytic_variance: Callable[[Any], np.ndarray] | None = None
    chunk_size: int = 5000

    @property
    def k_theta(self) -> int:
        return len(self.param_names)

    @property
    def k_eta(self) -> int:
        return self.summary.k_eta


# -- normal ----------------------------------------------------------------


def _normal_summaries_exact(thetas, n, rng):
    # (mean, m2) of n iid N(theta, 1) draws: mean ~ N(theta, 1/n) independent
    # of n * m2 ~ chi-square(n - 1).
    m = thetas.shape[0]
    mean = thetas[:, 0] + standard_normal(rng, m) / math.sqrt(n)
    m2 = 2.0 * rng.standard_gamma((n - 1) / 2.0, m) / n
    return np.column_stack([mean, m2])


def _normal_summaries_full(thetas, n, rng):
    y = thetas[:, :1] + standard_normal(rng, (thetas.shape[0], n))
    return S.normal_rows(y)


def normal_analytic_variance(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    n = y.size
    eta2 = S.summaries_normal(y)[1]
    return n * np.diag([eta2 / n, 2.0 * eta2**2 / (n - 1)])


def normal_model(sufficient: bool = True, prior: UniformPrior | None = None) -> ModelSpec:
    """Assumed model ``z_j ~ N(theta, 1)``.

    With ``sufficient=True`` the reference table draws the two summaries from
    their exact joint sampling distribution instead of materialising n
    observations per draw.
    """
    return ModelSpec(
        name="normal",
        param_names=("theta",),
        summary=S.NORMAL_SPEC,
        prior=prior or UniformPrior((-1.0,), (1.0,)),
        simulate_summaries=_normal_summaries_exact if sufficient else _normal_summaries_full,
        simulate_data=lambda theta, n, rng: theta[0] + standard_normal(rng, n),
        summarize=S.summaries_normal,
        bootstrap_scheme="iid",
        per_obs=S.normal_per_obs,
        analytic_variance=normal_analytic_variance,
        chunk_size=50_000 if sufficient else 500,
    )


# -- g-and-k regression -------------------------------------------------------


def gk_regression_model(
    x_obs: Sequence[float],
    a: float = 0.0,
    b: float = 1.0,
    g: float = 2.0,
    c: float = 0.8,
    prior: UniformPrior | None = None,
) -> ModelSpec:
    """Assumed model ``z_j = x_j beta + u_j`` with iid g-and-k errors.

    Inference is on ``(beta, k)``; ``a, b, g`` are held fixed. Pseudo-data are
    generated conditionally on the observed regressors ``x_obs``.
    """
    x = np.asarray(x_obs, dtype=float)
    n_obs = x.size

    def errors(k, size, rng):
        return gk_quantile(standard_normal(rng, size), a, b, g, k, c)

    def sim_summaries(thetas, n, rng):
        if n != n_obs:
            raise ValueError(f"regression model is conditioned on n={n_obs} regressors")
        u = errors(thetas[:, 1:2], (thetas.shape[0], n), rng)
        return S.gk_regression_rows(x, thetas[:, :1] * x + u)

    def sim_data(theta, n, rng):
        if n != n_obs:
            raise ValueError(f"regression model is conditioned on n={n_obs} regressors")
        return np.column_stack([x, theta[0] * x + errors(theta[1], n, rng)])

    return ModelSpec(
        name="gk",
        param_names=("beta", "k"),
        summary=S.GK_REGRESSION_SPEC,
        prior=prior or UniformPrior((0.0, 0.0), (5.0, 5.0)),
        simulate_summaries=sim_summaries,
        simulate_data=sim_data,
        summarize=S.gk_regression_pairs,
        bootstrap_scheme="iid",
        chunk_size=2000,
    )


# -- Ricker -------------------------------------------------------------------


def ricker_model(prior: UniformPrior | None = None, N1: float = 1.0) -> ModelSpec:
    """Assumed homoskedastic Ricker model, parameters ``(r, phi, sigma)``."""

    def simulate(thetas, n, rng):
        r, phi, sigma = thetas[:, 0], thetas[:, 1], thetas[:, 2]
        return ricker_batch(r, phi, sigma, sigma, n, n, rng, N1)

    def sim_data(theta, n, rng):
        return simulate(np.asarray(theta, dtype=float)[None, :], n, rng)[0][0]

    def sim_summaries(thetas, n, rng):
        counts, _, ok = simulate(thetas, n, rng)
        out = S.ricker_rows(counts)
        out[~ok] = np.nan
        return out

    return ModelSpec(
        name="ricker",
        param_names=("r", "phi", "sigma"),
        summary=S.RICKER_SPEC,
        prior=prior or UniformPrior((40.0, 5.0, 0.1), (70.0, 30.0, 2.0)),
        simulate_summaries=sim_summaries,
        simulate_data=sim_data,
        summarize=S.summaries_ricker,
        bootstrap_scheme="moving-block",
        chunk_size=2000,
    )


# -- MA(1) g-and-k returns ------------------------------------------------------

RETURNS_PRIOR = UniformPrior((-1.0, 0.0, 0.0, -4.0, -0.5), (1.0, 1.0, 1.0, 4.0, 1.0))


def _returns_series(thetas, n, rng):
    z = ma1_latent(thetas[:, 0], n, rng)
    t = thetas[:, 1:]
    return gk_quantile(z, t[:, :1], t[:, 1:2], t[:, 2:3], t[:, 3:4], 0.8)


def returns_model(prior: UniformPrior | None = None) -> ModelSpec:
    """MA(1) latent normal pushed through a g-and-k quantile function."""
    return ModelSpec(
        name="returns",
        param_names=("theta1", "a", "b", "g", "k"),
        summary=S.RETURNS_SPEC,
        prior=prior or RETURNS_PRIOR,
        simulate_summaries=lambda thetas, n, rng: S.returns_rows(_returns_series(thetas, n, rng)),
        simulate_data=lambda theta, n, rng: _returns_series(np.asarray(theta)[None, :], n, rng)[0],
        summarize=S.summaries_returns,
        bootstrap_scheme="moving-block",
        chunk_size=2000,
    )
