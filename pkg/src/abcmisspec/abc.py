"""Accept/reject ABC, regression adjustment and reference-table persistence."""

from __future__ import annotations

import csv
import logging
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import SimulationError, SingularMatrixError
from .numerics import solve_stable
from .problems import ModelSpec
from .rng import SeedPath, as_seed

log = logging.getLogger(__name__)

MAX_RETRIES = 100
TABLE_MAGIC = b"ABCRT\x00\x00\x01"


@dataclass
class ReferenceTable:
    draws: np.ndarray
    summaries: np.ndarray
    distances: np.ndarray
    eta_obs: np.ndarray
    alpha: float
    seed: SeedPath | None = None
    weights: np.ndarray | None = None
    resimulated: int = 0

    @property
    def N(self) -> int:
        return self.draws.shape[0]

    def recompute_distances(self) -> np.ndarray:
        return euclidean_distance(self.summaries, self.eta_obs, self.weights)


@dataclass
class AcceptedSet:
    draws: np.ndarray
    summaries: np.ndarray
    indices: np.ndarray
    adjusted: np.ndarray | None = None
    beta: np.ndarray | None = field(default=None, repr=False)

    @property
    def delta(self) -> int:
        return self.draws.shape[0]


def euclidean_distance(u, v, weights=None):
    """Weighted Euclidean distance; ``u`` may be a matrix of row vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1]:
        raise ValueError(f"length mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    diff = u - v
    sq = diff * diff
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != (u.shape[-1],) or np.any(w <= 0):
            raise ValueError("weights must be positive with one entry per summary")
        sq = sq * w
    out = np.sqrt(sq.sum(axis=-1))
    return out if out.ndim else float(out)


def acceptance_count(alpha: float, N: int) -> int:
    return min(N, max(1, math.ceil(round(alpha * N, 9))))


def select_smallest(distances: np.ndarray, delta: int) -> np.ndarray:
    """Indices of the ``delta`` smallest distances, ordered by (distance, index).

    Ties at the boundary go to the lower index.
    """
    d = np.asarray(distances)
    N = d.size
    if delta >= N:
        return np.lexsort((np.arange(N), d))
    kth = np.partition(d, delta - 1)[delta - 1]
    below = np.flatnonzero(d < kth)
    at = np.flatnonzero(d == kth)[: delta - below.size]
    sel = np.concatenate([below, at])
    return sel[np.lexsort((sel, d[sel]))]


def _fill_chunk(model: ModelSpec, n: int, seed: SeedPath, start: int, m: int):
    rng = seed.generator()
    thetas = model.prior.sample(rng, m)
    summ = model.simulate_summaries(thetas, n, rng)
    bad = ~np.all(np.isfinite(summ), axis=1)
    retries = 0
    attempt = 0
    while bad.any():
        attempt += 1
        if attempt > MAX_RETRIES:
            raise SimulationError(
                f"{int(bad.sum())} draws in rows {start}..{start + m - 1} failed after {MAX_RETRIES} retries"
            )
        rows = np.flatnonzero(bad)
        retries += rows.size
        sub = seed.child(attempt).generator()
        new_t = model.prior.sample(sub, rows.size)
        new_s = model.simulate_summaries(new_t, n, sub)
        thetas[rows] = new_t
        summ[rows] = new_s
        bad[rows] = ~np.all(np.isfinite(new_s), axis=1)
    return thetas, summ, retries


def simulate_table(
    model: ModelSpec, N: int, n: int, seed: SeedPath | int, threads: int = 1
) -> tuple[np.ndarray, np.ndarray, int]:
    """Prior draws and their summaries for N records.

    Records are produced in fixed-size chunks, chunk ``c`` drawing from
    ``seed.child(c)``; the result does not depend on ``threads``.
    """
    seed = as_seed(seed)
    size = model.chunk_size
    starts = list(range(0, N, size))
    jobs = [(model, n, seed.child(c), s, min(size, N - s)) for c, s in enumerate(starts)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _fill_chunk(*a), jobs))
    else:
        parts = [_fill_chunk(*a) for a in jobs]
    draws = np.concatenate([p[0] for p in parts])
    summ = np.concatenate([p[1] for p in parts])
    retries = sum(p[2] for p in parts)
    if retries:
        log.info("%s: resimulated %d failed draws", model.name, retries)
    return draws, summ, retries


def accept(table: ReferenceTable, alpha: float | None = None) -> AcceptedSet:
    alpha = table.alpha if alpha is None else alpha
    idx = select_smallest(table.distances, acceptance_count(alpha, table.N))
    return AcceptedSet(draws=table.draws[idx], summaries=table.summaries[idx], indices=idx)


def abc_reject(
    model: ModelSpec,
    eta_obs,
    N: int,
    alpha: float,
    n: int,
    seed: SeedPath | int,
    weights=None,
    threads: int = 1,
) -> tuple[ReferenceTable, AcceptedSet]:
    """Accept/reject ABC: keep the ceil(alpha N) draws nearest to ``eta_obs``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if N * alpha < 1 - 1e-9:
        raise ValueError("N must be at least 1/alpha")
    eta_obs = np.asarray(eta_obs, dtype=float)
    if eta_obs.shape != (model.k_eta,):
        raise ValueError(f"observed summaries must have length {model.k_eta}")
    seed = as_seed(seed)
    draws, summ, retries = simulate_table(model, N, n, seed, threads)
    w = None if weights is None else np.asarray(weights, dtype=float)
    table = ReferenceTable(
        draws=draws,
        summaries=summ,
        distances=euclidean_distance(summ, eta_obs, w),
        eta_obs=eta_obs,
        alpha=alpha,
        seed=seed,
        weights=w,
        resimulated=retries,
    )
    return table, accept(table)


def posterior_mean(accepted: AcceptedSet, use_adjusted: bool = False) -> np.ndarray:
    if accepted.delta < 1:
        raise ValueError("empty accepted set")
    if use_adjusted:
        if accepted.adjusted is None:
            raise ValueError("accepted set has no regression-adjusted draws")
        return accepted.adjusted.mean(axis=0)
    return accepted.draws.mean(axis=0)


def regression_coefficients(summaries: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """(k_eta, k_theta) slope matrix of the draws regressed on the summaries."""
    ce = summaries - summaries.mean(axis=0)
    ct = draws - draws.mean(axis=0)
    delta = summaries.shape[0]
    try:
        return solve_stable(ce.T @ ce / delta, ce.T @ ct / delta, what="summary covariance")
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            "summary covariance is singular beyond ridge", code="singular-summary-covariance"
        ) from exc


def regression_adjust(accepted: AcceptedSet, eta_obs) -> AcceptedSet:
    """Linear regression adjustment of the accepted draws towards ``eta_obs``."""
    k_eta = accepted.summaries.shape[1]
    if accepted.delta <= k_eta + 1:
        raise ValueError(f"regression adjustment needs more than {k_eta + 1} accepted draws")
    eta_obs = np.asarray(eta_obs, dtype=float)
    gap = eta_obs - accepted.summaries
    if not np.any(gap):
        # every record hits the observed summaries: nothing to shift, and
        # the summary covariance is singular anyway
        beta = np.zeros((k_eta, accepted.draws.shape[1]))
        return replace(accepted, adjusted=accepted.draws.copy(), beta=beta)
    beta = regression_coefficients(accepted.summaries, accepted.draws)
    shift = gap @ beta
    return replace(accepted, adjusted=accepted.draws + shift, beta=beta)


# -- persistence ---------------------------------------------------------------


def table_header(table: ReferenceTable) -> list[str]:
    k_theta = table.draws.shape[1]
    k_eta = table.summaries.shape[1]
    return (
        [f"theta_{i}" for i in range(1, k_theta + 1)]
        + [f"eta_{i}" for i in range(1, k_eta + 1)]
        + ["dist"]
    )


def write_table_csv(table: ReferenceTable, path) -> None:
    rows = np.column_stack([table.draws, table.summaries, table.distances])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table_header(table))
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def read_table_csv(path, eta_obs, alpha: float, weights=None) -> ReferenceTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    k_theta = sum(h.startswith("theta_") for h in header)
    k_eta = sum(h.startswith("eta_") for h in header)
    data = data.reshape(-1, len(header))
    return ReferenceTable(
        draws=data[:, :k_theta],
        summaries=data[:, k_theta : k_theta + k_eta],
        distances=data[:, -1],
        eta_obs=np.asarray(eta_obs, dtype=float),
        alpha=alpha,
        weights=None if weights is None else np.asarray(weights, dtype=float),
    )


def write_table_binary(table: ReferenceTable, path) -> None:
    """Binary cache: magic, uint64 N/k_theta/k_eta, float64 alpha and eta_obs,
    then N rows of (theta, eta, dist) as little-endian float64, row-major."""
    N, k_theta = table.draws.shape
    k_eta = table.summaries.shape[1]
    rows = np.column_stack([table.draws, table.summaries, table.distances]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(TABLE_MAGIC)
        fh.write(struct.pack("<QQQd", N, k_theta, k_eta, table.alpha))
        fh.write(np.asarray(table.eta_obs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(rows).tobytes())


def read_table_binary(path) -> ReferenceTable:
    raw = Path(path).read_bytes()
    if raw[:8] != TABLE_MAGIC:
        raise ValueError("not a reference-table cache (bad magic)")
    N, k_theta, k_eta, alpha = struct.unpack_from("<QQQd", raw, 8)
    off = 8 + 32
    eta_obs = np.frombuffer(raw, dtype="<f8", count=k_eta, offset=off).astype(float)
    off += 8 * k_eta
    width = k_theta + k_eta + 1
    rows = np.frombuffer(raw, dtype="<f8", count=N * width, offset=off).reshape(N, width)
    rows = rows.astype(float)
    return ReferenceTable(
        draws=rows[:, :k_theta],
        summaries=rows[:, k_theta : k_theta + k_eta],
        distances=rows[:, -1],
        eta_obs=eta_obs,
        alpha=alpha,
    )


def simulate_at(model: ModelSpec, thetas, n: int, seed: SeedPath | int) -> np.ndarray:
    """Summaries of one size-``n`` pseudo-dataset per row of ``thetas``.

    Failed rows are resimulated at the same parameter value from a fresh
    sub-seed, at most ``MAX_RETRIES`` times.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    seed = as_seed(seed)
    size = model.chunk_size
    parts = []
    for c, start in enumerate(range(0, thetas.shape[0], size)):
        block = thetas[start : start + size]
        cseed = seed.child(c)
        summ = model.simulate_summaries(block, n, cseed.generator())
        bad = ~np.all(np.isfinite(summ), axis=1)
        attempt = 0
        while bad.any():
            attempt += 1
            if attempt > MAX_RETRIES:
                raise SimulationError(f"simulation at fixed parameters failed {MAX_RETRIES} times")
            rows = np.flatnonzero(bad)
            new = model.simulate_summaries(block[rows], n, cseed.child(attempt).generator())
            summ[rows] = new
            bad[rows] = ~np.all(np.isfinite(new), axis=1)
        parts.append(summ)
    return np.concatenate(parts)
