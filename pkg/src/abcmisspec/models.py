"""Forward simulators for the benchmark data-generating processes.

Each process has a single-dataset entry point keyed by a :class:`SeedPath` and
a batched kernel that simulates many datasets at once from a generator; the
single-dataset functions are thin wrappers over the batched kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import SeedPath, as_seed, standard_normal

# Poisson means above this are treated as a simulator failure.
MAX_POISSON_MEAN = 1e12


@dataclass(frozen=True)
class GkParams:
    a: float = 0.0
    b: float = 1.0
    g: float = 0.0
    k: float = 0.0
    c: float = 0.8

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("g-and-k scale b must be positive")
        if not self.k > -0.5:
            raise ValueError("g-and-k kurtosis k must exceed -0.5")


@dataclass(frozen=True)
class EndogGkParams:
    beta: float = 0.5
    rho: float = 0.0
    theta_x: GkParams = field(default_factory=lambda: GkParams(0.0, 1.0, 2.0, 1.0))
    theta_u: GkParams = field(default_factory=lambda: GkParams(0.0, 1.0, 2.0, 1.0))

    def __post_init__(self):
        if abs(self.rho) > 1:
            raise ValueError("rho must lie in [-1, 1]")


@dataclass(frozen=True)
class RickerParams:
    r: float = 44.7
    phi: float = 10.0
    sigma1: float = 1.3
    sigma2: float = 0.3
    k_break: float = 1.0
    N1: float = 1.0
    T: int = 250

    def __post_init__(self):
        if not 0 < self.k_break <= 1:
            raise ValueError("k_break must lie in (0, 1]")
        if self.T < 1:
            raise ValueError("T must be positive")

    @property
    def t1(self) -> int:
        return min(self.T, max(1, math.ceil(round(self.k_break * self.T, 9))))


@dataclass(frozen=True)
class Ma1GkParams:
    theta1: float = 0.0
    gk: GkParams = field(default_factory=GkParams)


def gk_quantile(z, a=0.0, b=1.0, g=0.0, k=0.0, c=0.8):
    """g-and-k quantile function evaluated at standard-normal deviates ``z``.

    Accepts a :class:`GkParams` as the second argument. All arguments broadcast.
    ``(1 - exp(-g z)) / (1 + exp(-g z))`` is evaluated as ``tanh(g z / 2)``.
    """
    if isinstance(a, GkParams):
        a, b, g, k, c = a.a, a.b, a.g, a.k, a.c
    z = np.asarray(z, dtype=float)
    skew = 1.0 + c * np.tanh(0.5 * g * z)
    kurt = np.exp(k * np.log1p(z * z))
    out = a + b * skew * kurt * z
    return out if out.ndim else float(out)


def simulate_normal(theta: float, sigma: float, n: int, seed: SeedPath | int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_seed(seed).generator()
    return theta + sigma * standard_normal(rng, n)


def correlated_normals(rho: float, size, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    zx = standard_normal(rng, size)
    w = standard_normal(rng, size)
    zu = rho * zx + math.sqrt(max(0.0, 1.0 - rho * rho)) * w
    return zx, zu


def simulate_gk_regression(params: EndogGkParams, n: int, seed: SeedPath | int):
    """Regression ``y = beta x + u`` with g-and-k regressor and error whose latent
    normals have correlation ``rho``. Returns ``(x, y)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_seed(seed).generator()
    zx, zu = correlated_normals(params.rho, n, rng)
    x = gk_quantile(zx, params.theta_x)
    u = gk_quantile(zu, params.theta_u)
    return x, params.beta * x + u


def ricker_batch(
    r,
    phi,
    sigma1,
    sigma2,
    t1: int,
    T: int,
    rng: np.random.Generator,
    N1: float = 1.0,
):
    """Simulate ``m`` Ricker series at once (parameters broadcast to shape (m,)).

    Returns ``(counts, log_latent, ok)``: integer counts (m, T), the latent
    log-population (m, T) and a mask of rows whose simulation stayed finite.
    """
    r, phi, sigma1, sigma2 = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (r, phi, sigma1, sigma2))
    )
    m = r.shape[0]
    log_n = np.empty((m, T))
    log_n[:, 0] = math.log(N1)
    if T > 1:
        eps = standard_normal(rng, (m, T - 1))
        log_r = np.log(r)
        for t in range(T - 1):
            # 1-based time t+1 <= t1 uses the first regime
            sig = sigma1 if t + 1 <= t1 else sigma2
            prev = log_n[:, t]
            log_n[:, t + 1] = log_r + prev - np.exp(prev) + sig * eps[:, t]
    lam = phi[:, None] * np.exp(log_n)
    ok = np.all(np.isfinite(log_n), axis=1) & np.all(lam <= MAX_POISSON_MEAN, axis=1)
    lam = np.where(ok[:, None], lam, 0.0)
    counts = rng.poisson(lam)
    return counts, log_n, ok


def simulate_ricker(params: RickerParams, seed: SeedPath | int, return_latent: bool = False):
    rng = as_seed(seed).generator()
    counts, log_n, _ = ricker_batch(
        params.r, params.phi, params.sigma1, params.sigma2, params.t1, params.T, rng, params.N1
    )
    if return_latent:
        return counts[0], np.exp(log_n[0])
    return counts[0]


def ma1_latent(theta1, T: int, rng: np.random.Generator) -> np.ndarray:
    """Standardised MA(1) latent normals, one presample innovation per row."""
    theta1 = np.atleast_1d(np.asarray(theta1, dtype=float))[:, None]
    eps = standard_normal(rng, (theta1.shape[0], T + 1))
    return (eps[:, 1:] + theta1 * eps[:, :-1]) / np.sqrt(1.0 + theta1 * theta1)


def simulate_ma1_gk(params: Ma1GkParams, T: int, seed: SeedPath | int, return_latent: bool = False):
    if T < 2:
        raise ValueError("T must be >= 2")
    rng = as_seed(seed).generator()
    z = ma1_latent(params.theta1, T, rng)[0]
    y = gk_quantile(z, params.gk)
    return (y, z) if return_latent else y
