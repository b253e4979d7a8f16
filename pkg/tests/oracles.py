"""Independent reference implementations used to cross-check the package.

Nothing here imports from ``abcmisspec``; each routine follows the textbook
definition as directly as possible, trading speed for transparency.
"""

from __future__ import annotations

import math

import numpy as np


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x).

    Power series below ``a + 1``, modified Lentz continued fraction above.
    """
    if x <= 0:
        return 0.0
    log_pref = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1:
        term = 1.0 / a
        total = term
        ap = a
        for _ in range(10_000):
            ap += 1
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-17:
                break
        return total * math.exp(log_pref)
    tiny = 1e-300
    b = x + 1 - a
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < 1e-17:
            break
    return 1.0 - math.exp(log_pref) * h


def chi2_quantile_bisect(dof: int, prob: float, tol: float = 1e-13) -> float:
    if prob == 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while gammainc_lower(dof / 2, hi / 2) < prob:
        hi *= 2
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if gammainc_lower(dof / 2, mid / 2) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quantile_type7(sample, p: float) -> float:
    xs = sorted(float(v) for v in sample)
    h = (len(xs) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def normal_equations(X, Y):
    """Least squares through (X'X) b = X'Y, solved by Gaussian elimination."""
    X = [[float(v) for v in row] for row in np.atleast_2d(X)]
    Y = np.asarray(Y, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    p = len(X[0])
    q = Y.shape[1]
    A = [[sum(X[i][r] * X[i][c] for i in range(len(X))) for c in range(p)] for r in range(p)]
    Bm = [[sum(X[i][r] * Y[i, j] for i in range(len(X))) for j in range(q)] for r in range(p)]
    M = [A[r] + Bm[r] for r in range(p)]
    for col in range(p):
        piv = max(range(col, p), key=lambda r: abs(M[r][col]))
        M[col], M[piv] = M[piv], M[col]
        for r in range(p):
            if r != col:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return np.array([[M[r][p + j] / M[r][r] for j in range(q)] for r in range(p)])


def regression_beta(summaries, draws):
    """Slope block of the multi-output regression of draws on [1, summaries]."""
    s = np.asarray(summaries, dtype=float)
    X = np.column_stack([np.ones(s.shape[0]), s])
    return normal_equations(X, draws)[1:]


def acf(series, lag: int) -> float:
    y = [float(v) for v in series]
    T = len(y)
    m = sum(y) / T
    den = sum((v - m) ** 2 for v in y)
    if den == 0:
        return 0.0
    return sum((y[t] - m) * (y[t - lag] - m) for t in range(lag, T)) / den


def ricker_summaries(y):
    """Nine Ricker summaries computed with plain loops."""
    y = [float(v) for v in y]
    out = [acf(y, lag) for lag in range(1, 6)]
    x1 = [v**0.3 for v in y[:-1]]
    x2 = [v**0.6 for v in y[:-1]]
    resp = [v**0.3 for v in y[1:]]
    X = np.column_stack([x1, x2])
    out += list(normal_equations(X, resp)[:, 0])
    out.append(sum(y) / len(y))
    out.append(float(sum(v == 0 for v in y)))
    return np.array(out)


def gk_quantile_direct(z, a, b, g, k, c=0.8):
    e = math.exp(-g * z)
    return a + b * (1 + c * (1 - e) / (1 + e)) * (1 + z * z) ** k * z


def ricker_skeleton(r, N1, steps):
    """Noise-free Ricker recursion on the natural scale."""
    out = [N1]
    for _ in range(steps):
        out.append(r * out[-1] * math.exp(-out[-1]))
    return np.array(out)
