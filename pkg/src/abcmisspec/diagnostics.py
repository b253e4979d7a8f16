"""Misspecification diagnostics run on top of an accept/reject ABC fit.

* :func:`asymptotic_gof` compares summaries simulated at the posterior mean
  with the observed summaries through a quadratic form that is asymptotically
  chi-square under correct specification. No ABC re-runs are needed.
* :func:`simulated_gof`, :func:`predictive_pvalue` and :func:`discrepancy_diag`
  calibrate their statistics by resampling or resimulation.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .abc import (
    AcceptedSet,
    ReferenceTable,
    abc_reject,
    euclidean_distance,
    regression_adjust,
    select_smallest,
    simulate_at,
)
from .errors import AbcError, InsufficientDataError, NonpositiveDofError, SimulationError
from .numerics import (
    VarianceEstimate,
    bootstrap_variance,
    chi2_quantile,
    plugin_variance,
    quantile,
    solve_stable,
)
from .problems import ModelSpec
from .rng import SeedPath, as_seed

KINDS = ("asymptotic-gof", "simulated-gof", "predictive-pvalue", "discrepancy")
NN_FLOOR = 10_000


@dataclass
class DiagnosticReport:
    kind: str
    statistic: float
    reject: bool
    seconds: float
    alpha_level: float
    dof: int | None = None
    critical_value: float | None = None
    quantiles: dict[str, float] | None = None
    resampled: np.ndarray | None = field(default=None, repr=False)
    config: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.resampled is not None:
            self.resampled = np.sort(np.asarray(self.resampled, dtype=float))

    def to_dict(self, include_resampled: bool = True) -> dict[str, Any]:
        out = {
            "kind": self.kind,
            "statistic": float(self.statistic),
            "dof": self.dof,
            "critical_value": None if self.critical_value is None else float(self.critical_value),
            "quantiles": self.quantiles,
            "reject": bool(self.reject),
            "seconds": float(self.seconds),
            "alpha_level": self.alpha_level,
            "config": self.config,
        }
        if include_resampled and self.resampled is not None:
            out["resampled"] = [float(v) for v in self.resampled]
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw), sort_keys=True)


@dataclass(frozen=True)
class GofConfig:
    """Settings for the asymptotic goodness-of-fit test.

    ``Nn=None`` picks the number of simulated observations with
    :func:`choose_Nn`. ``variance_source`` is one of ``plug-in``,
    ``bootstrap`` or ``analytic``; ``scheme=None`` uses the model's default
    bootstrap scheme.
    """

    Nn: int | None = None
    C: float = 1.0
    alpha_level: float = 0.05
    variance_source: str = "plug-in"
    B: int = 200
    scheme: str | None = None

    def __post_init__(self):
        if self.variance_source not in ("plug-in", "bootstrap", "analytic"):
            raise ValueError(f"unknown variance source {self.variance_source!r}")
        if not 0 < self.alpha_level < 1:
            raise ValueError("alpha_level must lie in (0, 1)")
        if self.C <= 0:
            raise ValueError("C must be positive")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def choose_Nn(n: int, k_theta: int, C: float = 1.0) -> int:
    """Simulated sample size ``max(C log(n) n^(q/2), 10000)``, ``q = max(k_theta, 2)``."""
    if n < 2:
        raise InsufficientDataError("n must be >= 2")
    q = max(k_theta, 2)
    return math.ceil(max(C * math.log(n) * n ** (q / 2.0), NN_FLOOR))


def j_statistic(eta_hat_z, eta_obs, V0: VarianceEstimate | np.ndarray, n: int) -> float:
    """``n (eta_hat_z - eta_obs)' V0^{-1} (eta_hat_z - eta_obs)``."""
    diff = np.asarray(eta_hat_z, dtype=float) - np.asarray(eta_obs, dtype=float)
    mat = V0.matrix if isinstance(V0, VarianceEstimate) else np.asarray(V0, dtype=float)
    if mat.shape != (diff.size, diff.size):
        raise ValueError("variance dimension does not match summaries")
    if not np.any(diff):
        return 0.0
    x = solve_stable(mat, diff, what="variance estimate")
    return max(0.0, float(n * diff @ x))


def estimate_variance(model: ModelSpec, data, cfg: GofConfig, seed: SeedPath | int) -> VarianceEstimate:
    if cfg.variance_source == "analytic":
        if model.analytic_variance is None:
            raise ValueError(f"model {model.name} has no analytic variance")
        return VarianceEstimate.build(model.analytic_variance(data), "analytic")
    if cfg.variance_source == "plug-in":
        if model.per_obs is None:
            raise ValueError(f"model {model.name} has no per-observation summaries")
        return plugin_variance(model.per_obs(data))
    scheme = cfg.scheme or model.bootstrap_scheme
    return bootstrap_variance(data, model.summarize, cfg.B, scheme, seed)


def asymptotic_gof(
    model: ModelSpec,
    theta_hat,
    eta_obs,
    cfg: GofConfig,
    n: int,
    seed: SeedPath | int,
    data=None,
    V0: VarianceEstimate | np.ndarray | None = None,
) -> DiagnosticReport:
    """Chi-square goodness-of-fit test at the ABC posterior mean.

    The simulated summary is the average of summary vectors over
    ``ceil(Nn / n)`` independent size-``n`` pseudo-datasets generated at
    ``theta_hat``. ``V0`` may be passed in; otherwise it is estimated from
    ``data`` according to ``cfg.variance_source``.
    """
    dof = model.k_eta - model.k_theta
    if dof <= 0:
        raise NonpositiveDofError(f"k_eta={model.k_eta} <= k_theta={model.k_theta}")
    t0 = time.perf_counter()
    seed = as_seed(seed)
    Nn = cfg.Nn if cfg.Nn is not None else choose_Nn(n, model.k_theta, cfg.C)
    reps = math.ceil(Nn / n)
    theta_hat = np.asarray(theta_hat, dtype=float)
    sims = simulate_at(model, np.tile(theta_hat, (reps, 1)), n, seed.child(0))
    eta_hat = sims.mean(axis=0)
    if V0 is None:
        if data is None:
            raise ValueError("need observed data or a precomputed V0")
        V0 = estimate_variance(model, data, cfg, seed.child(1))
    elif not isinstance(V0, VarianceEstimate):
        V0 = VarianceEstimate.build(V0, "analytic")
    J = j_statistic(eta_hat, eta_obs, V0, n)
    crit = chi2_quantile(dof, 1.0 - cfg.alpha_level)
    return DiagnosticReport(
        kind="asymptotic-gof",
        statistic=J,
        reject=J > crit,
        seconds=time.perf_counter() - t0,
        alpha_level=cfg.alpha_level,
        dof=dof,
        critical_value=crit,
        config={**cfg.to_dict(), "Nn": Nn, "replicates": reps, "ridge": V0.ridge_applied,
                "variance_provenance": V0.provenance},
    )


def simulated_gof(
    table: ReferenceTable,
    accepted: AcceptedSet,
    R: int,
    alpha_level: float,
    seed: SeedPath | int,
    scope: str = "accepted",
) -> DiagnosticReport:
    """Goodness of fit calibrated by treating table rows as pseudo-observations.

    With ``scope="accepted"`` the statistic is the mean distance from the
    observed summaries to the accepted records, and each pseudo-observed row
    ``r`` is scored by the mean distance to its own ABC acceptance set (same
    size, drawn from the remaining rows). ``scope="all"`` averages over every
    table row instead; that version is blind to misspecification the prior
    predictive spread swamps.
    """
    if scope not in ("accepted", "all"):
        raise ValueError(f"unknown scope {scope!r}")
    N = table.N
    if R > N:
        raise ValueError(f"R={R} exceeds table size N={N}")
    t0 = time.perf_counter()
    rng = as_seed(seed).generator()
    delta = accepted.delta
    if scope == "all":
        eps_bar = float(table.distances.mean())
    else:
        eps_bar = float(table.distances[accepted.indices].mean())
    picks = rng.choice(N, size=R, replace=False)
    eps_r = np.empty(R)
    for r, i in enumerate(picks):
        eta_r = table.summaries[i]
        dist = euclidean_distance(table.summaries, eta_r, table.weights)
        pool = dist.copy()
        pool[i] = np.inf
        idx = select_smallest(pool, min(delta, N - 1))
        eps_r[r] = dist.mean() if scope == "all" else dist[idx].mean()
        sub = AcceptedSet(table.draws[idx], table.summaries[idx], idx)
        if sub.delta > table.summaries.shape[1] + 1:
            regression_adjust(sub, eta_r)
    q = quantile(eps_r, 1.0 - alpha_level)
    return DiagnosticReport(
        kind="simulated-gof",
        statistic=eps_bar,
        reject=eps_bar > q,
        seconds=time.perf_counter() - t0,
        alpha_level=alpha_level,
        quantiles={f"{1 - alpha_level:g}": q},
        resampled=eps_r,
        config={"R": R, "N": N, "delta": delta, "scope": scope},
    )


def predictive_pvalue(
    accepted: AcceptedSet,
    model: ModelSpec,
    scalar_index: int,
    R: int,
    alpha_level: float,
    n: int,
    seed: SeedPath | int,
    eta_obs,
    use_adjusted: bool = False,
) -> DiagnosticReport:
    """Posterior-predictive interval check on one scalar summary."""
    if not 0 <= scalar_index < model.k_eta:
        raise ValueError("scalar_index out of range")
    t0 = time.perf_counter()
    seed = as_seed(seed)
    pool = accepted.adjusted if use_adjusted and accepted.adjusted is not None else accepted.draws
    rng = seed.generator()
    thetas = pool[rng.integers(0, pool.shape[0], size=R)]
    sims = simulate_at(model, thetas, n, seed.child(0))[:, scalar_index]
    obs = float(np.asarray(eta_obs, dtype=float)[scalar_index])
    lo = quantile(sims, alpha_level / 2)
    hi = quantile(sims, 1 - alpha_level / 2)
    return DiagnosticReport(
        kind="predictive-pvalue",
        statistic=obs,
        reject=not lo <= obs <= hi,
        seconds=time.perf_counter() - t0,
        alpha_level=alpha_level,
        quantiles={f"{alpha_level / 2:g}": lo, f"{1 - alpha_level / 2:g}": hi},
        resampled=sims,
        config={"R": R, "scalar_index": scalar_index, "use_adjusted": use_adjusted},
    )


def powers_h(draws: np.ndarray) -> np.ndarray:
    """``h(theta) = (theta^2, theta^3)`` stacked per draw."""
    return np.concatenate([draws**2, draws**3], axis=1)


def _h_gap(accepted: AcceptedSet, h_fn, n: int) -> float:
    h_raw = h_fn(accepted.draws).mean(axis=0)
    h_adj = h_fn(accepted.adjusted).mean(axis=0)
    return math.sqrt(n) * float(np.linalg.norm(h_raw - h_adj))


def discrepancy_diag(
    accepted: AcceptedSet,
    model: ModelSpec,
    theta_hat,
    R: int,
    inner_N: int,
    inner_alpha: float,
    alpha_level: float,
    n: int,
    seed: SeedPath | int,
    eta_obs,
    h_fn: Callable[[np.ndarray], np.ndarray] = powers_h,
    weights=None,
) -> DiagnosticReport:
    """Gap between accept/reject and regression-adjusted posterior functionals,
    calibrated by rerunning both on pseudo-data simulated at ``theta_hat``."""
    t0 = time.perf_counter()
    seed = as_seed(seed)
    if accepted.adjusted is None:
        accepted = regression_adjust(accepted, eta_obs)
    d = _h_gap(accepted, h_fn, n)
    theta_hat = np.asarray(theta_hat, dtype=float)
    d_r = np.empty(R)
    for r in range(R):
        try:
            eta_r = simulate_at(model, theta_hat[None, :], n, seed.child(r, 0))[0]
            _, acc_r = abc_reject(model, eta_r, inner_N, inner_alpha, n, seed.child(r, 1), weights)
            d_r[r] = _h_gap(regression_adjust(acc_r, eta_r), h_fn, n)
        except (AbcError, ValueError) as exc:
            code = getattr(exc, "code", SimulationError.code)
            raise SimulationError(f"discrepancy replication {r}: {exc}", code=code) from exc
    q = quantile(d_r, 1.0 - alpha_level)
    return DiagnosticReport(
        kind="discrepancy",
        statistic=d,
        reject=d > q,
        seconds=time.perf_counter() - t0,
        alpha_level=alpha_level,
        quantiles={f"{1 - alpha_level:g}": q},
        resampled=d_r,
        config={"R": R, "inner_N": inner_N, "inner_alpha": inner_alpha},
    )
