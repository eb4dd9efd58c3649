"""Numerical kernels used by the KPI modules.

Least squares goes through the SVD so near-collinear designs are detected
instead of silently producing garbage; the Shapiro-Wilk test is Royston's
AS R94 algorithm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import (
    DegenerateSample,
    LengthMismatch,
    RankDeficient,
    SampleSizeOutOfRange,
    ZeroVector,
)

RANK_TOL = 1e-10


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    r_squared: float
    residuals: np.ndarray


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("design matrix must be 2-D")
    if not np.all(np.isfinite(X)):
        raise ValueError("design matrix contains non-finite values")
    return X


def _lstsq_svd(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0.0 or s[-1] / s[0] < RANK_TOL:
        cond = 0.0 if s.size == 0 or s[0] == 0.0 else s[-1] / s[0]
        raise RankDeficient(f"design is rank deficient (relative singular value {cond:.3g})")
    return Vt.T @ ((U.T @ y) / s)


def solve_ols(X, y) -> OlsFit:
    """Ordinary least squares. ``X`` must already contain the intercept column."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise LengthMismatch(f"X has {n} rows but y has {y.size} entries")
    if n <= p:
        raise RankDeficient(f"need more rows than columns (got {n}x{p})")
    beta = _lstsq_svd(X, y)
    resid = y - X @ beta
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(resid @ resid)
    r2 = 0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return OlsFit(beta, min(max(r2, 0.0), 1.0), resid)


def weighted_least_squares(X, y, w) -> np.ndarray:
    """Minimise ``sum(w * (y - X @ beta)**2)`` via the sqrt(w)-scaled system."""
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n, p = X.shape
    if y.shape != (n,) or w.shape != (n,):
        raise LengthMismatch("X, y and w must agree in length")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if np.count_nonzero(w > 0) < p:
        raise RankDeficient("fewer positive weights than columns")
    sw = np.sqrt(w)
    return _lstsq_svd(X * sw[:, None], y * sw)


def _rank_average(a: np.ndarray) -> np.ndarray:
    return stats.rankdata(a, method="average")


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = a - a.mean()
    db = b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        return 0.0
    # one square root of the product keeps identical rank vectors at exactly 1
    r = float(da @ db) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def spearman_rho(a, b) -> float:
    """Spearman correlation with average ranks for ties; 0 for a constant input."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"length {a.size} != {b.size}")
    if a.size < 2:
        raise LengthMismatch("need at least two observations")
    return pearson(_rank_average(a), _rank_average(b))


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if u.size != v.size:
        raise LengthMismatch(f"length {u.size} != {v.size}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine similarity undefined for a zero vector")
    return min(1.0, max(-1.0, float(u @ v) / (nu * nv)))


def chi_square_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


# AS R94 polynomial coefficients (Royston 1995)
_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coef, x: float) -> float:
    out = 0.0
    for c in reversed(coef):
        out = out * x + c
    return out


def _swilk_coefficients(n: int) -> np.ndarray:
    """Half vector of Shapiro-Wilk weights for the upper order statistics."""
    nn2 = n // 2
    a = np.zeros(nn2)
    if n == 3:
        a[0] = math.sqrt(0.5)
        return a
    i = np.arange(1, nn2 + 1)
    m = special.ndtri((i - 0.375) / (n + 0.25))
    summ2 = 2.0 * float(m @ m)
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        i1 = 2
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2 - 2.0 * m[1] ** 2)
                        / (1.0 - 2.0 * a1 ** 2 - 2.0 * a2 ** 2))
        a[1] = a2
    else:
        i1 = 1
        fac = math.sqrt((summ2 - 2.0 * m[0] ** 2) / (1.0 - 2.0 * a1 ** 2))
    a[0] = a1
    a[i1:] = -m[i1:] / fac
    return a


def shapiro_wilk(x) -> tuple[float, float]:
    """Shapiro-Wilk W and p-value, Royston's AS R94 approximation (3 <= n <= 5000)."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    n = x.size
    if n < 3 or n > 5000:
        raise SampleSizeOutOfRange(f"sample size {n} outside [3, 5000]")
    rng = x[-1] - x[0]
    if rng < 1e-19 * max(1.0, abs(x[0])):
        raise DegenerateSample("all values are equal")
    a = _swilk_coefficients(n)
    nn2 = n // 2
    xs = (x - x[0]) / rng
    # antisymmetric weights: lower half negative, upper half positive
    num = float(a @ (xs[::-1][:nn2] - xs[:nn2]))
    ssq = float(np.sum((xs - xs.mean()) ** 2))
    w = min(1.0, num * num / ssq)

    if n == 3:
        pw = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        return w, min(1.0, max(0.0, pw))
    w1 = math.log1p(-w) if w < 1.0 else -math.inf
    if w1 == -math.inf:
        return w, 1.0
    if n <= 11:
        gamma = _poly(_G, float(n))
        if w1 >= gamma:
            return w, 1e-99
        y = -math.log(gamma - w1)
        mean = _poly(_C3, float(n))
        sd = math.exp(_poly(_C4, float(n)))
    else:
        xx = math.log(n)
        y = w1
        mean = _poly(_C5, xx)
        sd = math.exp(_poly(_C6, xx))
    pw = float(special.ndtr(-(y - mean) / sd))
    return w, pw
