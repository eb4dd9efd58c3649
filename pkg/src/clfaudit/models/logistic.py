"""Logistic regression by IRLS, fitted on z-scored features.

The same solver handles a Gaussian prior on the coefficients (used by the
multilevel model): the prior enters as pseudo-observations in the weighted
least-squares step, so penalised and plain fits share one code path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import DidNotConverge, PerfectSeparation, RankDeficient, TrainingError
from ..numerics import weighted_least_squares

SEPARATION_NORM = 1e4


@dataclass(frozen=True)
class ParamEstimate:
    name: str
    value: float
    std_error: float


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean, scale)

    def design(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.mean) / self.scale
        return np.column_stack([np.ones(X.shape[0]), Z])

    def back_transform(self) -> np.ndarray:
        """Matrix A with theta_original = A @ theta_standardized (intercept first)."""
        d = self.mean.size
        A = np.zeros((d + 1, d + 1))
        A[0, 0] = 1.0
        A[0, 1:] = -self.mean / self.scale
        A[1:, 1:] = np.diag(1.0 / self.scale)
        return A


@dataclass(frozen=True)
class IrlsResult:
    coef: np.ndarray
    cov: np.ndarray
    iterations: int
    converged: bool


def irls(D, y, max_iter=100, tol=1e-8, prior_mean=None, prior_precision=None, start=None,
         raise_on_failure=True) -> IrlsResult:
    """Newton/IRLS for the (optionally Gaussian-penalised) logistic likelihood.

    ``prior_precision`` is the diagonal of the prior precision matrix; zero
    entries leave that coefficient unpenalised.
    """
    n, p = D.shape
    if prior_precision is None:
        prior_precision = np.zeros(p)
        prior_mean = np.zeros(p)
    penalised = np.any(prior_precision > 0)
    beta = np.zeros(p) if start is None else np.array(start, dtype=float)
    if start is None and prior_mean is not None and penalised:
        beta = np.array(prior_mean, dtype=float)
    eye = np.eye(p)
    D_aug = np.vstack([D, eye]) if penalised else D
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = D @ beta
        mu = expit(eta)
        w = mu * (1.0 - mu)
        w = np.maximum(w, 1e-12)
        z = eta + (y - mu) / w
        try:
            if penalised:
                new = weighted_least_squares(D_aug, np.concatenate([z, prior_mean]),
                                             np.concatenate([w, prior_precision]))
            else:
                new = weighted_least_squares(D, z, w)
        except RankDeficient as exc:
            raise TrainingError(f"IRLS step failed: {exc}") from exc
        if not np.all(np.isfinite(new)) or np.linalg.norm(new) > SEPARATION_NORM:
            raise PerfectSeparation(
                f"coefficient norm diverged (>{SEPARATION_NORM:g}) at iteration {it}")
        step = np.max(np.abs(new - beta))
        beta = new
        if step < tol:
            converged = True
            break
    if not converged and raise_on_failure:
        raise DidNotConverge(it)
    mu = expit(D @ beta)
    w = mu * (1.0 - mu)
    H = D.T @ (D * w[:, None]) + np.diag(prior_precision)
    cov = np.linalg.pinv(H)
    return IrlsResult(beta, cov, it, converged)


@dataclass(frozen=True, eq=False)
class FittedLogistic:
    feature_names: tuple
    coef: np.ndarray          # intercept first, original feature units
    cov: np.ndarray           # covariance of ``coef`` in original units
    iterations: int
    converged: bool

    kind = "logistic"

    @property
    def intercept(self) -> float:
        return float(self.coef[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.coef[1:]

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov), 0.0))

    def coefficients(self) -> list[ParamEstimate]:
        names = ["alpha"] + [f"beta_{f}" for f in self.feature_names]
        return [ParamEstimate(nm, float(v), float(s))
                for nm, v, s in zip(names, self.coef, self.std_errors)]

    def linear_predictor(self, X, groups=None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.coef[0] + X @ self.coef[1:]

    def predict_proba(self, X, groups=None) -> np.ndarray:
        return expit(self.linear_predictor(X, groups))


def _check_classes(y):
    counts = np.bincount(y.astype(int), minlength=2)
    if counts.min() < 2:
        raise TrainingError(f"need >= 2 rows per class, got {counts.tolist()}")


def fit_logistic(train, max_iter: int = 100, tol: float = 1e-8) -> FittedLogistic:
    """Maximum-likelihood logistic regression with Fisher-information standard errors."""
    X, y = train.X, train.y.astype(float)
    _check_classes(train.y)
    std = Standardizer.fit(X)
    res = irls(std.design(X), y, max_iter=max_iter, tol=tol)
    A = std.back_transform()
    return FittedLogistic(tuple(train.feature_names), A @ res.coef, A @ res.cov @ A.T,
                          res.iterations, res.converged)
