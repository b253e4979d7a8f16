"""Monte Carlo harness: power/size tables, timing tables and the returns application."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import problems
from .abc import abc_reject, posterior_mean, regression_adjust
from .config import StudyConfig, canonical_json
from .diagnostics import (
    KINDS,
    DiagnosticReport,
    asymptotic_gof,
    discrepancy_diag,
    predictive_pvalue,
    simulated_gof,
)
from .models import (
    EndogGkParams,
    GkParams,
    Ma1GkParams,
    RickerParams,
    simulate_gk_regression,
    simulate_ma1_gk,
    simulate_normal,
    simulate_ricker,
)
from .rng import SeedPath

log = logging.getLogger(__name__)

GK_TRUTH = {"beta": 0.5, "a": 0.0, "b": 1.0, "g": 2.0, "k": 1.0, "c": 0.8}
RICKER_TRUTH = {"r": 44.7, "phi": 10.0, "sigma1": 1.3, "sigma2": 0.3, "N1": 1.0}
RETURNS_TRUTH = {"a": 0.08, "b": 0.08, "g": -0.2, "k": 0.02}


def simulate_truth(cfg: StudyConfig, value: float, n: int, seed: SeedPath):
    """One observed dataset from the true process at grid value ``value``."""
    if cfg.model == "normal":
        return simulate_normal(cfg.truth.get("theta", 0.0), value, n, seed)
    if cfg.model == "gk":
        t = {**GK_TRUTH, **cfg.truth}
        gk = GkParams(t["a"], t["b"], t["g"], t["k"], t["c"])
        x, y = simulate_gk_regression(EndogGkParams(t["beta"], value, gk, gk), n, seed)
        return np.column_stack([x, y])
    if cfg.model == "ricker":
        t = {**RICKER_TRUTH, **cfg.truth}
        params = RickerParams(t["r"], t["phi"], t["sigma1"], t["sigma2"], value, t["N1"], n)
        return simulate_ricker(params, seed)
    t = {**RETURNS_TRUTH, **cfg.truth}
    return simulate_ma1_gk(Ma1GkParams(value, GkParams(t["a"], t["b"], t["g"], t["k"])), n, seed)


def assumed_model(cfg: StudyConfig, data) -> problems.ModelSpec:
    prior = problems.UniformPrior(tuple(cfg.prior["lows"]), tuple(cfg.prior["highs"])) if cfg.prior else None
    if cfg.model == "normal":
        return problems.normal_model(sufficient=cfg.fast_summaries, prior=prior)
    if cfg.model == "gk":
        t = {**GK_TRUTH, **cfg.truth}
        return problems.gk_regression_model(data[:, 0], t["a"], t["b"], t["g"], t["c"], prior=prior)
    if cfg.model == "ricker":
        return problems.ricker_model(prior=prior, N1=cfg.truth.get("N1", 1.0))
    return problems.returns_model(prior=prior)


@dataclass
class Outcome:
    kind: str
    reject: bool | None
    statistic: float | None
    seconds: float
    error: str | None = None


@dataclass
class Fit:
    model: problems.ModelSpec
    data: Any
    eta_obs: np.ndarray
    table: Any
    accepted: Any
    theta_hat: np.ndarray
    abc_seconds: float


def fit(cfg: StudyConfig, data, n: int, seed: SeedPath, threads: int = 1) -> Fit:
    t0 = time.perf_counter()
    model = assumed_model(cfg, data)
    eta = model.summarize(data)
    table, acc = abc_reject(
        model, eta, cfg.abc.N, cfg.abc.alpha, n, seed, cfg.abc.weights, threads=threads
    )
    if cfg.theta_hat_adjusted:
        acc = regression_adjust(acc, eta)
    theta_hat = posterior_mean(acc, use_adjusted=cfg.theta_hat_adjusted)
    return Fit(model, data, eta, table, acc, theta_hat, time.perf_counter() - t0)


def run_diagnostic(kind: str, cfg: StudyConfig, f: Fit, n: int, seed: SeedPath) -> DiagnosticReport:
    alpha = cfg.nominal_level
    if kind == "asymptotic-gof":
        return asymptotic_gof(f.model, f.theta_hat, f.eta_obs, cfg.gof, n, seed, data=f.data)
    if kind == "simulated-gof":
        return simulated_gof(f.table, f.accepted, cfg.R, alpha, seed, scope=cfg.sim_gof_scope)
    if kind == "predictive-pvalue":
        return predictive_pvalue(
            f.accepted, f.model, f.model.summary.scalar_pp_index, cfg.R, alpha, n, seed,
            f.eta_obs, use_adjusted=cfg.pp_use_adjusted,
        )
    if kind == "discrepancy":
        return discrepancy_diag(
            f.accepted, f.model, f.theta_hat, cfg.R, cfg.inner_N, cfg.inner_alpha, alpha, n,
            seed, f.eta_obs, weights=cfg.abc.weights,
        )
    raise ValueError(f"unknown diagnostic {kind!r}")


def run_replication(cfg: StudyConfig, n: int, value: float, seed: SeedPath) -> list[Outcome]:
    """Simulate the truth, fit ABC under the assumed model, run each diagnostic.

    Diagnostic ``i`` of ``KINDS`` draws from ``seed.child(2, i)`` so adding or
    dropping a test never changes the others.
    """
    try:
        data = simulate_truth(cfg, value, n, seed.child(0))
        f = fit(cfg, data, n, seed.child(1))
    except Exception as exc:  # recorded, the study continues
        msg = f"{seed}: {type(exc).__name__}: {exc}"
        log.warning("replication failed: %s", msg)
        return [Outcome(kind, None, None, 0.0, msg) for kind in cfg.tests]
    out = []
    for kind in cfg.tests:
        try:
            rep = run_diagnostic(kind, cfg, f, n, seed.child(2, KINDS.index(kind)))
            out.append(Outcome(kind, bool(rep.reject), float(rep.statistic), rep.seconds))
        except Exception as exc:
            msg = f"{seed}: {type(exc).__name__}: {exc}"
            log.warning("%s failed: %s", kind, msg)
            log.debug(traceback.format_exc())
            out.append(Outcome(kind, None, None, 0.0, msg))
    return out


@dataclass
class StudyResult:
    config: StudyConfig
    records: list[dict[str, Any]]
    rows: list[dict[str, Any]] = field(default_factory=list)

    POWER_FIELDS = (
        "model", "n", "grid_param", "grid_value", "diagnostic", "replications",
        "rejections", "frequency", "se", "errors", "master_seed", "config_digest",
    )
    RECORD_FIELDS = (
        "n", "grid_value", "replication", "diagnostic", "reject", "statistic", "error",
    )

    def row(self, n: int, value: float, kind: str) -> dict[str, Any]:
        for r in self.rows:
            if r["n"] == n and r["grid_value"] == value and r["diagnostic"] == kind:
                return r
        raise KeyError((n, value, kind))

    def frequency(self, n: int, value: float, kind: str) -> float:
        return self.row(n, value, kind)["frequency"]

    def power_csv(self) -> str:
        return _csv(self.POWER_FIELDS, self.rows)

    def records_csv(self) -> str:
        return _csv(self.RECORD_FIELDS, self.records)

    def timing_rows(self) -> list[dict[str, Any]]:
        out = []
        for n in self.config.sample_sizes:
            for kind in self.config.tests:
                secs = [r["seconds"] for r in self.records
                        if r["n"] == n and r["diagnostic"] == kind and r["error"] is None]
                out.append({
                    "model": self.config.model, "n": n, "diagnostic": kind,
                    "runs": len(secs), "mean_seconds": float(np.mean(secs)) if secs else math.nan,
                    "master_seed": self.config.seed, "config_digest": self.config.digest(),
                })
        return out

    def timing_csv(self) -> str:
        return _csv(("model", "n", "diagnostic", "runs", "mean_seconds", "master_seed", "config_digest"),
                    self.timing_rows())

    def to_json(self) -> str:
        return canonical_json({
            "config": self.config.to_dict(),
            "rows": self.rows,
            "timing": self.timing_rows(),
        })


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def aggregate(cfg: StudyConfig, records: list[dict[str, Any]]) -> list[dict[str, Any]]:
    rows = []
    for n in cfg.sample_sizes:
        for value in cfg.grid:
            for kind in cfg.tests:
                cell = [r for r in records
                        if r["n"] == n and r["grid_value"] == value and r["diagnostic"] == kind]
                ok = [r for r in cell if r["error"] is None]
                rej = sum(bool(r["reject"]) for r in ok)
                p = rej / len(ok) if ok else math.nan
                rows.append({
                    "model": cfg.model,
                    "n": n,
                    "grid_param": cfg.grid_param,
                    "grid_value": value,
                    "diagnostic": kind,
                    "replications": len(ok),
                    "rejections": rej,
                    "frequency": p,
                    "se": math.sqrt(p * (1 - p) / len(ok)) if ok else math.nan,
                    "errors": len(cell) - len(ok),
                    "mean_seconds": float(np.mean([r["seconds"] for r in ok])) if ok else math.nan,
                    "master_seed": cfg.seed,
                    "config_digest": cfg.digest(),
                })
    return rows


def run_power_study(
    cfg: StudyConfig,
    threads: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> StudyResult:
    """Every (sample size, grid value, replication) cell, then aggregated
    rejection frequencies. Output is independent of ``threads``."""
    root = SeedPath(cfg.seed)
    jobs = [
        (n, value, rep, root.child(i, j, rep))
        for i, n in enumerate(cfg.sample_sizes)
        for j, value in enumerate(cfg.grid)
        for rep in range(cfg.replications)
    ]
    done = [0]

    def work(job):
        n, value, rep, seed = job
        res = run_replication(cfg, n, value, seed)
        done[0] += 1
        if progress:
            progress(done[0], len(jobs))
        return res

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    records = [
        {"n": n, "grid_value": value, "replication": rep, "diagnostic": o.kind,
         "reject": o.reject, "statistic": o.statistic, "seconds": o.seconds, "error": o.error}
        for (n, value, rep, _), outs in zip(jobs, results)
        for o in outs
    ]
    return StudyResult(cfg, records, aggregate(cfg, records))


def run_timing_study(cfg: StudyConfig) -> list[dict[str, Any]]:
    """Mean wall-clock per diagnostic and sample size, measured after the ABC fit.

    Runs single-threaded so the timings are not distorted by contention.
    """
    return run_power_study(cfg, threads=1).timing_rows()


# -- returns application ------------------------------------------------------


@dataclass
class ApplicationResult:
    posterior: list[dict[str, Any]]
    reports: dict[str, DiagnosticReport]
    fit: Fit

    POSTERIOR_FIELDS = ("parameter", "mean", "median", "lower", "upper")

    def posterior_csv(self) -> str:
        return _csv(self.POSTERIOR_FIELDS, self.posterior)


def posterior_table(f: Fit, level: float = 0.95) -> list[dict[str, Any]]:
    tail = (1 - level) / 2
    draws = f.accepted.draws
    rows = []
    for j, name in enumerate(f.model.param_names):
        col = draws[:, j]
        rows.append({
            "parameter": name,
            "mean": float(col.mean()),
            "median": float(np.quantile(col, 0.5)),
            "lower": float(np.quantile(col, tail)),
            "upper": float(np.quantile(col, 1 - tail)),
        })
    return rows


def fit_returns(returns, cfg: StudyConfig, seed: SeedPath, threads: int = 1) -> Fit:
    y = np.asarray(returns, dtype=float)
    if y.size < 8:
        raise ValueError("need at least 8 returns")
    return fit(cfg, y, y.size, seed, threads=threads)


def run_application(returns, cfg: StudyConfig, threads: int = 1) -> ApplicationResult:
    """Fit the MA(1) g-and-k model to a return series and run the diagnostics."""
    root = SeedPath(cfg.seed)
    f = fit_returns(returns, cfg, root.child(1), threads=threads)
    if "discrepancy" in cfg.tests and f.accepted.adjusted is None:
        f.accepted = regression_adjust(f.accepted, f.eta_obs)
    reports = {
        kind: run_diagnostic(kind, cfg, f, len(f.data), root.child(2, KINDS.index(kind)))
        for kind in cfg.tests
    }
    return ApplicationResult(posterior_table(f), reports, f)
