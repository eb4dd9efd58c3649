"""Random intercept and slope multilevel logistic regression.

Estimation alternates two steps until nothing moves:

1. per group, a MAP fit of the logistic likelihood under the Gaussian prior
   ``N(mu, sigma**2)`` on every coefficient (penalised IRLS);
2. moment matching of ``(mu, sigma)`` across groups, where the spread
   includes the posterior variances so sigma does not collapse spuriously.

Everything happens on globally z-scored features; estimates are mapped back
to original units at the end.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import DidNotConverge, TrainingError, UnknownGroup
from .logistic import ParamEstimate, Standardizer, _check_classes, fit_logistic, irls


@dataclass(frozen=True, eq=False)
class FittedMlogrm:
    feature_names: tuple
    group_names: tuple
    coef: np.ndarray        # (groups, 1 + features), original units
    cov: np.ndarray         # (groups, 1 + features, 1 + features)
    mu: np.ndarray          # hyper-mean, original units
    sigma: np.ndarray       # hyper-sd, original units
    iterations: int
    converged: bool
    strict_groups: bool = False

    kind = "mlogrm"

    @property
    def mu_alpha(self) -> float:
        return float(self.mu[0])

    @property
    def sigma_alpha(self) -> float:
        return float(self.sigma[0])

    @property
    def mu_beta(self) -> np.ndarray:
        return self.mu[1:]

    @property
    def sigma_beta(self) -> np.ndarray:
        return self.sigma[1:]

    def std_errors(self, g: int) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.cov[g]), 0.0))

    def coefficients(self) -> list[ParamEstimate]:
        out = []
        names = ["alpha"] + [f"beta_{f}" for f in self.feature_names]
        for g, gname in enumerate(self.group_names):
            se = self.std_errors(g)
            out.extend(ParamEstimate(f"{nm}[{gname}]", float(v), float(s))
                       for nm, v, s in zip(names, self.coef[g], se))
        return out

    def group_coef(self, group) -> np.ndarray:
        """Coefficient vector for a group name; unseen groups get the hyper-mean."""
        try:
            return self.coef[self.group_names.index(group)]
        except ValueError:
            if self.strict_groups:
                raise UnknownGroup(f"group {group!r} was not seen in training") from None
            return self.mu

    def rows_coef(self, groups, n: int) -> np.ndarray:
        if groups is None:
            if self.strict_groups:
                raise UnknownGroup("group labels required in strict-group mode")
            return np.broadcast_to(self.mu, (n, self.mu.size))
        groups = np.asarray(groups, dtype=object)
        if groups.shape == ():
            return np.broadcast_to(self.group_coef(groups.item()), (n, self.mu.size))
        if groups.shape[0] != n:
            raise ValueError("one group label per row required")
        out = np.empty((n, self.mu.size))
        for g in np.unique(groups):
            out[groups == g] = self.group_coef(g)
        return out

    def linear_predictor(self, X, groups=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        C = self.rows_coef(groups, X.shape[0])
        return C[:, 0] + np.einsum("ij,ij->i", X, C[:, 1:])

    def predict_proba(self, X, groups=None) -> np.ndarray:
        return expit(self.linear_predictor(X, groups))


def fit_mlogrm(train, max_iter: int = 5000, tol: float = 1e-6, prior_sd=None,
               sigma_floor: float = 1e-2, strict_groups: bool = False) -> FittedMlogrm:
    """Fit per-group coefficients with partial pooling.

    ``prior_sd`` (standardized units) fixes the prior spread instead of
    estimating it; ``sigma_floor`` bounds the estimated spread from below.
    """
    if train.groups is None:
        raise TrainingError("multilevel model needs a group column")
    _check_classes(train.y)
    names = tuple(train.group_names)
    present = np.unique(train.groups)
    X, y = train.X, train.y.astype(float)
    p = X.shape[1] + 1

    if present.size == 1:
        warnings.warn("single group: multilevel model degenerates to plain logistic regression",
                      RuntimeWarning, stacklevel=2)
        lr = fit_logistic(train, max_iter=max(max_iter, 100), tol=min(tol, 1e-8))
        return FittedMlogrm(tuple(train.feature_names), (names[present[0]],),
                            lr.coef[None, :], lr.cov[None, :, :], lr.coef.copy(), np.zeros(p),
                            lr.iterations, True, strict_groups)

    std = Standardizer.fit(X)
    D = std.design(X)
    rows = [np.flatnonzero(train.groups == g) for g in present]
    J = len(rows)
    both = [np.unique(train.y[r]).size == 2 and r.size >= 2 for r in rows]

    pooled = irls(D, y, max_iter=200, tol=1e-10)
    mu = pooled.coef.copy()
    fixed = prior_sd is not None
    if fixed:
        sigma2 = np.full(p, float(prior_sd) ** 2)
    else:
        sigma2 = np.ones(p)
    b = np.tile(mu, (J, 1))
    V = np.zeros((J, p, p))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        prec = 1.0 / np.maximum(sigma2, 1e-300)
        b_old = b.copy()
        for j, r in enumerate(rows):
            if not both[j]:
                b[j] = mu
                V[j] = np.diag(sigma2)
                continue
            res = irls(D[r], y[r], max_iter=200, tol=tol * 1e-2, prior_mean=mu,
                       prior_precision=prec, start=b[j])
            b[j] = res.coef
            V[j] = res.cov
        mu_new = b.mean(axis=0)
        if fixed:
            sigma2_new = sigma2
        else:
            spread = ((b - mu_new) ** 2).mean(axis=0) + np.einsum("jkk->jk", V).mean(axis=0)
            sigma2_new = np.maximum(spread, sigma_floor ** 2)
        delta = max(np.max(np.abs(b - b_old)), np.max(np.abs(mu_new - mu)),
                    np.max(np.abs(np.sqrt(sigma2_new) - np.sqrt(sigma2))))
        mu, sigma2 = mu_new, sigma2_new
        if delta < tol:
            converged = True
            break
    if not converged:
        raise DidNotConverge(it)

    A = std.back_transform()
    coef = b @ A.T
    cov = np.einsum("ik,jkl,ml->jim", A, V, A)
    sigma = np.sqrt(np.maximum(np.diag(A @ np.diag(sigma2) @ A.T), 0.0))
    trained = tuple(names[g] for g in present)
    return FittedMlogrm(tuple(train.feature_names), trained, coef, cov,
                        A @ mu, sigma, it, converged, strict_groups)
