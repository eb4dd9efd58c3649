"""Model-aspect KPIs: statistical properties, accuracy and robustness."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from . import kpi
from .data import Dataset, group_labels
from .errors import (LengthMismatch, NotApplicable, OneClassOnly, RankDeficient,
                     ZeroOutputVariance)
from .models import FittedForest, FittedLogistic, FittedMlogrm, predict_proba
from .numerics import chi_square_sf, shapiro_wilk, solve_ols

SWT_MAX_N = 5000
SWT_SUBSAMPLE_SEED = 20230101
DENOMINATOR_FLOOR = 1e-12


@dataclass(frozen=True)
class SensitivityConfig:
    samples_per_parameter: int = 100

    def __post_init__(self):
        if self.samples_per_parameter < 2:
            raise ValueError("samples_per_parameter must be at least 2")


# ---------------------------------------------------------------- VIF

def vif(X, centered: bool = False) -> np.ndarray:
    """Variance inflation factor per column, ``+inf`` under exact collinearity.

    By default each column is regressed on the others *without* an intercept,
    so R^2 is the uncentered one (the convention of the usual statsmodels
    recipe applied to a raw design). ``centered=True`` adds the intercept and
    uses the ordinary R^2; for zero-mean data both agree.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 3 or d < 2:
        raise ValueError("VIF needs at least 3 rows and 2 features")
    out = np.empty(d)
    for j in range(d):
        target = X[:, j]
        others = np.delete(X, j, axis=1)
        if centered:
            others = np.column_stack([np.ones(n), others])
        try:
            fit = solve_ols(others, target)
            resid = fit.residuals
        except RankDeficient:
            # the regressors themselves are collinear; min-norm fit still gives R^2
            beta, *_ = np.linalg.lstsq(others, target, rcond=None)
            resid = target - others @ beta
        ref = target - target.mean() if centered else target
        ss_tot = float(ref @ ref)
        ss_res = float(resid @ resid)
        if ss_tot == 0.0:
            out[j] = np.inf
            continue
        one_minus_r2 = ss_res / ss_tot
        out[j] = np.inf if one_minus_r2 <= 1e-12 else 1.0 / min(one_minus_r2, 1.0)
    return out


# ------------------------------------------------------- residual tests

def _require_parametric(model, what: str):
    if isinstance(model, FittedForest):
        raise NotApplicable(f"{what}: random forests carry no distributional model assumptions")


def pearson_residuals(model, d: Dataset) -> np.ndarray:
    p = predict_proba(model, d.X, group_labels(d))
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return (d.y - p) / np.sqrt(p * (1 - p))


def _maybe_subsample(n: int) -> np.ndarray:
    idx = np.arange(n)
    if n > SWT_MAX_N:
        rng = np.random.default_rng(SWT_SUBSAMPLE_SEED)
        idx = np.sort(rng.choice(n, SWT_MAX_N, replace=False))
    return idx


def swt_residuals(model, d: Dataset) -> float:
    """Shapiro-Wilk p-value of the Pearson residuals."""
    _require_parametric(model, "SWT")
    r = pearson_residuals(model, d)
    return shapiro_wilk(r[_maybe_subsample(r.size)])[1]


def breusch_pagan(resid, X) -> tuple[float, float]:
    """Koenker form: LM = n * R^2 of squared residuals on X plus intercept."""
    X = np.asarray(X, dtype=float)
    e2 = np.asarray(resid, dtype=float) ** 2
    n, k = X.shape
    fit = solve_ols(np.column_stack([np.ones(n), X]), e2)
    lm = n * fit.r_squared
    return lm, chi_square_sf(lm, k)


def bpt_residuals(model, d: Dataset) -> float:
    _require_parametric(model, "BPT")
    return breusch_pagan(pearson_residuals(model, d), d.X)[1]


# ------------------------------------------------------------ accuracy

def auc_roc(y, scores) -> float:
    """Mann-Whitney AUC; tied scores count one half."""
    y = np.asarray(y)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise LengthMismatch("labels and scores differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("AUC needs both classes")
    ranks = rankdata(s)  # average ranks -> ties get half credit
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def f1_score(y, y_hat) -> float:
    y = np.asarray(y).astype(bool)
    y_hat = np.asarray(y_hat).astype(bool)
    if y.shape != y_hat.shape:
        raise LengthMismatch("labels and predictions differ in length")
    tp = int(np.sum(y & y_hat))
    fp = int(np.sum(~y & y_hat))
    fn = int(np.sum(y & ~y_hat))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


# ------------------------------------------------------------ robustness

def _group_params(model, group):
    """(coefficients, standard errors) of a parametric model, per group for the multilevel one."""
    if isinstance(model, FittedForest):
        raise NotApplicable("random forests have no model parameters to perturb")
    if isinstance(model, FittedMlogrm):
        if group is None:
            raise ValueError("multilevel model: name the group whose parameters are swept")
        g = model.group_names.index(group)
        return model.coef[g], model.std_errors(g)
    return model.coef, model.std_errors


def _output_variance(coef, X) -> float:
    return float(np.var(expit(coef[0] + X @ coef[1:])))


def sobol_first_order(model, j: int, X_test, cfg: SensitivityConfig = SensitivityConfig(),
                      group=None) -> float:
    """First-order index of parameter ``j`` (0 is the intercept).

    Parameter ``j`` sweeps an equispaced grid over estimate +- one standard
    error at the mean test row; the variance of that sweep is divided by the
    variance of the fitted probabilities across the test rows.
    """
    coef, se = _group_params(model, group)
    X = np.atleast_2d(np.asarray(X_test, dtype=float))
    den = _output_variance(coef, X)
    if den < DENOMINATOR_FLOOR:
        raise ZeroOutputVariance(f"prediction variance over the test rows is {den:.3g}")
    if se[j] == 0.0:
        return 0.0  # np.var of a constant sweep leaves ~1e-31 of rounding
    xbar = np.concatenate([[1.0], X.mean(axis=0)])
    grid = np.linspace(coef[j] - se[j], coef[j] + se[j], cfg.samples_per_parameter)
    eta_rest = float(coef @ xbar - coef[j] * xbar[j])
    num = float(np.var(expit(eta_rest + grid * xbar[j])))
    return num / den


def _tsvr_one(model, X, cfg, group=None) -> float:
    p = len(model.feature_names) + 1
    total = sum(sobol_first_order(model, j, X, cfg, group) for j in range(p))
    if total > 1.0:
        warnings.warn(f"TSVR {total:.3g} exceeds 1; first-order indices alone are not a "
                      "variance decomposition here", RuntimeWarning, stacklevel=3)
    return total


def tsvr(model, X_test, cfg: SensitivityConfig = SensitivityConfig(), groups=None):
    """Sum of first-order indices; a {group: value} map for the multilevel model.

    Groups whose test rows give zero prediction variance are left out of the
    map; if that leaves nothing, ZeroOutputVariance is raised.
    """
    X = np.atleast_2d(np.asarray(X_test, dtype=float))
    if not isinstance(model, FittedMlogrm):
        _group_params(model, None)
        return _tsvr_one(model, X, cfg)
    if groups is None:
        raise ValueError("multilevel model: group labels for the test rows are required")
    groups = np.asarray(groups, dtype=object)
    out = {}
    for g in model.group_names:
        rows = groups == g
        if not rows.any():
            continue
        try:
            out[g] = _tsvr_one(model, X[rows], cfg, g)
        except ZeroOutputVariance:
            continue
    if not out:
        raise ZeroOutputVariance("no group has test rows with varying predictions")
    return out


def _csvp_block(X, p, band, delta) -> int:
    sel = np.abs(p - 0.5) <= band
    if sel.sum() < 2:
        return 0
    Z = X[sel]
    norms = np.linalg.norm(Z, axis=1)
    ok = norms > 0
    cos = np.zeros((Z.shape[0], Z.shape[0]))
    Zn = Z[ok] / norms[ok, None]
    cos[np.ix_(ok, ok)] = Zn @ Zn.T
    cls = p[sel] >= 0.5
    differ = cls[:, None] != cls[None, :]
    hit = np.triu((cos > 1.0 - delta) & differ, k=1)
    return int(hit.sum())


def csvp(model, X_test, band_halfwidth: float = 0.01, delta: float = 0.1, groups=None):
    """Near-identical pairs straddling the 0.5 boundary; per group when ``groups`` is given."""
    X = np.atleast_2d(np.asarray(X_test, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("CSVP needs at least one test row")
    p = predict_proba(model, X, groups)
    if groups is None:
        return _csvp_block(X, p, band_halfwidth, delta)
    groups = np.asarray(groups, dtype=object)
    return {g: _csvp_block(X[groups == g], p[groups == g], band_halfwidth, delta)
            for g in sorted(set(groups.tolist()))}


# --------------------------------------------------------- KPI wrappers

def _guard(kpi_id, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except NotApplicable as exc:
        return kpi.not_applicable(kpi_id, exc.reason)


def vif_kpi(model, train: Dataset) -> kpi.KpiResult:
    if isinstance(model, FittedForest):
        return kpi.not_applicable("1.1.2a", "multicollinearity is not a model assumption of random forests")
    if train.d < 2:
        return kpi.not_applicable("1.1.2a", "VIF needs at least two features")
    values = vif(train.X)
    return kpi.scored("1.1.2a", dict(zip(train.feature_names, values)),
                      {"regression": "uncentered (no intercept)"})


def swt_kpi(model, train: Dataset) -> kpi.KpiResult:
    def run():
        return kpi.scored("1.1.2b", swt_residuals(model, train),
                          {"residuals": "pearson", "n": min(train.n, SWT_MAX_N)})
    return _guard("1.1.2b", run)


def bpt_kpi(model, train: Dataset) -> kpi.KpiResult:
    def run():
        _require_parametric(model, "BPT")
        lm, p = breusch_pagan(pearson_residuals(model, train), train.X)
        return kpi.scored("1.1.2c", p, {"lm_statistic": lm, "df": train.d})
    return _guard("1.1.2c", run)


def accuracy_kpis(model, test: Dataset) -> tuple[kpi.KpiResult, kpi.KpiResult]:
    p = predict_proba(model, test.X, group_labels(test))
    try:
        auc = kpi.scored("1.2.1", auc_roc(test.y, p), {"n": test.n})
    except OneClassOnly as exc:
        auc = kpi.not_applicable("1.2.1", str(exc))
    y_hat = (p >= 0.5).astype(int)
    f1 = kpi.scored("1.2.2", f1_score(test.y, y_hat), {"threshold": 0.5, "n": test.n})
    return auc, f1


def tsvr_kpi(model, test: Dataset, cfg: SensitivityConfig) -> kpi.KpiResult:
    def run():
        val = tsvr(model, test.X, cfg, group_labels(test))
        details = {"samples_per_parameter": cfg.samples_per_parameter}
        if isinstance(val, dict):
            skipped = sorted(set(model.group_names) - set(val))
            if skipped:
                details["groups_without_value"] = skipped
        return kpi.scored("1.3.1", val, details)
    return _guard("1.3.1", run)


def csvp_kpi(model, test: Dataset, band_halfwidth: float, delta: float) -> kpi.KpiResult:
    val = csvp(model, test.X, band_halfwidth, delta, group_labels(test))
    return kpi.scored("1.3.2", val, {"band_halfwidth": band_halfwidth, "delta": delta})
