"""Feature attributions and the fidelity KPIs comparing them.

Shapley values are computed three ways: exact enumeration of the
interventional game, kernel weighted least squares (exhaustive or sampled
coalitions) and, for forests, exact enumeration of the path-dependent game
evaluated by the compiled tree kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, logit

from . import _kernels, kpi
from .data import Dataset, group_labels
from .errors import (LengthMismatch, NotApplicable, RankDeficient, SpaceMismatch,
                     TooManyFeatures)
from .models import FittedForest, FittedLogistic, FittedMlogrm
from .numerics import spearman_rho, weighted_least_squares

LOG_ODDS, PROBABILITY = "log_odds", "probability"
MAX_ENUM_FEATURES = 15
SIGN_TOL = 1e-12
_MASK_BLOCK = 512


@dataclass(frozen=True)
class AttributionVector:
    base_value: float
    contributions: np.ndarray
    space: str
    method: str
    feature_names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "contributions", np.asarray(self.contributions, dtype=float))
        if self.space not in (LOG_ODDS, PROBABILITY):
            raise ValueError(f"unknown attribution space {self.space!r}")

    @property
    def total(self) -> float:
        return float(self.base_value + self.contributions.sum())

    def to_dict(self) -> dict:
        return {"method": self.method, "space": self.space, "base_value": float(self.base_value),
                "contributions": dict(zip(self.feature_names, map(float, self.contributions)))
                if self.feature_names else self.contributions.tolist()}


@dataclass(frozen=True)
class ExplainabilitySamplingPlan:
    instances_per_repetition: int = 50
    repetitions: int = 10
    seed: int = 0
    background_size: int = 100
    coalition_budget: Optional[int] = None   # None -> default for d; 0 -> exhaustive
    background: str = "training"             # or "origin": the point intrinsic terms refer to

    def __post_init__(self):
        for name in ("instances_per_repetition", "repetitions", "background_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.background not in ("training", "origin"):
            raise ValueError(f"unknown background {self.background!r}")


def default_budget(d: int) -> int:
    return 2 ** d if d <= 11 else 2048


# ------------------------------------------------------- model output

def output_fn(model, space: str, group=None) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised model output in ``space``; plain callables pass through unchanged."""
    if callable(model) and not hasattr(model, "feature_names"):
        return model
    if isinstance(model, (FittedLogistic, FittedMlogrm)):
        if space == LOG_ODDS:
            return lambda X: model.linear_predictor(X, group)
        return lambda X: model.predict_proba(X, group)
    if isinstance(model, FittedForest):
        if space == LOG_ODDS:
            return lambda X: logit(np.clip(model.predict_proba(X), 1e-12, 1 - 1e-12))
        return model.predict_proba
    raise TypeError(f"cannot evaluate {type(model).__name__}")


def _names(model) -> tuple:
    return tuple(getattr(model, "feature_names", ()))


def coalition_values(f, x, background, masks: np.ndarray) -> np.ndarray:
    """v(T) = mean over background rows of f at (x on T, background elsewhere).

    ``masks`` is a boolean (m, d) array.
    """
    x = np.asarray(x, dtype=float)
    B = np.atleast_2d(np.asarray(background, dtype=float))
    if B.shape[0] == 0:
        raise ValueError("background must have at least one row")
    out = np.empty(masks.shape[0])
    nb = B.shape[0]
    for s in range(0, masks.shape[0], _MASK_BLOCK):
        blk = masks[s:s + _MASK_BLOCK]
        H = np.where(blk[:, None, :], x[None, None, :], B[None, :, :]).reshape(-1, x.size)
        out[s:s + blk.shape[0]] = np.asarray(f(H), dtype=float).reshape(blk.shape[0], nb).mean(axis=1)
    return out


def _bitmasks(d: int) -> np.ndarray:
    m = np.arange(2 ** d, dtype=np.int64)
    return ((m[:, None] >> np.arange(d)) & 1).astype(bool)


def shapley_from_game(v: np.ndarray, d: int) -> np.ndarray:
    """Shapley values of a game given as v[bitmask] for all 2^d coalitions."""
    masks = np.arange(2 ** d, dtype=np.int64)
    sizes = np.array([bin(int(m)).count("1") for m in masks])
    w = np.array([math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d) if s < d else 0.0
                  for s in range(d + 1)])
    phi = np.empty(d)
    for p in range(d):
        bit = 1 << p
        without = masks[(masks & bit) == 0]
        phi[p] = float(np.sum(w[sizes[without]] * (v[without | bit] - v[without])))
    return phi


def exact_shapley(model, x, background, space: str = LOG_ODDS, group=None) -> AttributionVector:
    x = np.asarray(x, dtype=float)
    d = x.size
    if d > MAX_ENUM_FEATURES:
        raise TooManyFeatures(f"exact enumeration is capped at {MAX_ENUM_FEATURES} features, got {d}")
    v = coalition_values(output_fn(model, space, group), x, background, _bitmasks(d))
    phi = shapley_from_game(v, d)
    base = float(v[0])
    # efficiency holds by construction; guard against silent numerical trouble
    assert abs(base + phi.sum() - v[-1]) <= 1e-9 * max(1.0, abs(v[-1])), "efficiency violated"
    return AttributionVector(base, phi, space, "exact_shapley", _names(model))


def shapley_kernel_weight(d: int, s: int) -> float:
    return (d - 1) / (math.comb(d, s) * s * (d - s))


def _sample_coalitions(d: int, budget: int, rng: np.random.Generator) -> np.ndarray:
    sizes = np.arange(1, d)
    # total kernel mass of each size class is (d-1)/(s(d-s))
    mass = (d - 1) / (sizes * (d - sizes))
    picked = rng.choice(sizes, size=budget, p=mass / mass.sum())
    Z = np.zeros((budget, d), dtype=bool)
    for r, s in enumerate(picked):
        Z[r, rng.choice(d, size=s, replace=False)] = True
    return Z


def kernel_shapley(model, x, background, space: str = LOG_ODDS, coalition_budget="exhaustive",
                   rng: Optional[np.random.Generator] = None, group=None) -> AttributionVector:
    """Constrained weighted least squares over coalitions.

    ``coalition_budget="exhaustive"`` enumerates every proper coalition with
    its kernel weight; an integer draws that many coalitions from the kernel
    distribution (so each carries unit weight).
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    f = output_fn(model, space, group)
    ends = coalition_values(f, x, background, np.array([np.zeros(d, bool), np.ones(d, bool)]))
    v0, delta = float(ends[0]), float(ends[1] - ends[0])
    if d == 1:
        return AttributionVector(v0, np.array([delta]), space, "kernel_shapley", _names(model))

    if coalition_budget == "exhaustive":
        if d > MAX_ENUM_FEATURES:
            raise TooManyFeatures(f"exhaustive coalitions are capped at {MAX_ENUM_FEATURES} features")
        Z = _bitmasks(d)[1:-1]
        w = np.array([shapley_kernel_weight(d, int(s)) for s in Z.sum(axis=1)])
    else:
        budget = int(coalition_budget)
        if budget < d + 2:
            raise ValueError(f"coalition budget must be at least d + 2 = {d + 2}")
        Z = _sample_coalitions(d, budget, rng if rng is not None else np.random.default_rng(0))
        w = np.ones(budget)

    vz = coalition_values(f, x, background, Z)
    zf = Z.astype(float)
    # eliminate the last feature through the efficiency constraint
    A = zf[:, :-1] - zf[:, -1:]
    target = vz - v0 - zf[:, -1] * delta
    head = weighted_least_squares(A, target, w)
    phi = np.append(head, delta - head.sum())
    return AttributionVector(v0, phi, space, "kernel_shapley", _names(model))


def tree_game(forest: FittedForest, X) -> np.ndarray:
    """Path-dependent coalition values, shape (rows, 2^d), averaged over trees."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    if d > MAX_ENUM_FEATURES:
        raise TooManyFeatures(f"tree Shapley enumeration is capped at {MAX_ENUM_FEATURES} features")
    pk = forest.packed
    masks = np.arange(2 ** d, dtype=np.int64)
    return _kernels.tree_expectations(pk["feature"], pk["threshold"], pk["left"], pk["right"],
                                      pk["value"], pk["cover"], pk["roots"], pk["ends"],
                                      np.ascontiguousarray(X), masks)


def tree_shapley_batch(forest: FittedForest, X) -> tuple[np.ndarray, np.ndarray]:
    """(base values, attributions) for many rows in probability space."""
    V = tree_game(forest, X)
    d = np.atleast_2d(X).shape[1]
    phi = np.vstack([shapley_from_game(v, d) for v in V])
    return V[:, 0], phi


def tree_shapley(forest: FittedForest, x) -> AttributionVector:
    base, phi = tree_shapley_batch(forest, np.asarray(x, dtype=float)[None, :])
    return AttributionVector(float(base[0]), phi[0], PROBABILITY, "tree_shapley", forest.feature_names)


def intrinsic_attribution(model, x, group=None) -> AttributionVector:
    """Coefficient-times-value terms of the linear predictor, base = intercept."""
    if isinstance(model, FittedForest):
        raise NotApplicable("forests have no per-instance intrinsic attribution")
    x = np.asarray(x, dtype=float)
    coef = model.group_coef(group) if isinstance(model, FittedMlogrm) else model.coef
    return AttributionVector(float(coef[0]), coef[1:] * x, LOG_ODDS, "intrinsic", model.feature_names)


def vim_attribution(forest: FittedForest) -> AttributionVector:
    return AttributionVector(0.0, forest.vim(), PROBABILITY, "vim_global", forest.feature_names)


# ------------------------------------------------------------- KPIs

def _same_length(a: AttributionVector, b: AttributionVector):
    if a.contributions.size != b.contributions.size:
        raise LengthMismatch("attribution vectors differ in length")


def rho_order_kpi(a: AttributionVector, b: AttributionVector) -> float:
    _same_length(a, b)
    return spearman_rho(np.abs(a.contributions), np.abs(b.contributions))


def pux_kpi(intrinsic: AttributionVector, shap: AttributionVector) -> float:
    if "vim_global" in (intrinsic.method, shap.method):
        raise NotApplicable("global importances sum to one and carry no probability estimate")
    if intrinsic.space != LOG_ODDS or shap.space != LOG_ODDS:
        raise SpaceMismatch("PUX compares log-odds attributions")
    return abs(float(expit(intrinsic.total)) - float(expit(shap.total)))


def poifs_kpi(reference: AttributionVector, shap: AttributionVector) -> float:
    """Percentage of features whose attribution signs disagree; near-zero matches either sign."""
    _same_length(reference, shap)
    a, b = reference.contributions, shap.contributions
    flips = ((a > SIGN_TOL) & (b < -SIGN_TOL)) | ((a < -SIGN_TOL) & (b > SIGN_TOL))
    return 100.0 * flips.sum() / a.size


@dataclass
class ExplainabilityOutcome:
    results: list
    records: list = field(default_factory=list)   # per-instance attribution dumps


def _background(train: Dataset, plan: ExplainabilitySamplingPlan) -> np.ndarray:
    if plan.background == "origin":
        return np.zeros((1, train.d))
    rng = np.random.default_rng([plan.seed, 0xB6])
    k = min(plan.background_size, train.n)
    return train.X[np.sort(rng.choice(train.n, size=k, replace=False))]


def _kernel_with_retry(model, x, bg, budget, seed_words, group, space=LOG_ODDS):
    """Sampled kernel Shapley, redrawing coalitions if a draw leaves the system singular."""
    for attempt in range(16):
        rng = np.random.default_rng(list(seed_words) + [attempt])
        try:
            return kernel_shapley(model, x, bg, space, budget, rng, group)
        except RankDeficient:
            continue
    return kernel_shapley(model, x, bg, space, "exhaustive", None, group)


def _parametric_audit(model, train: Dataset, plan: ExplainabilitySamplingPlan, keep_records: bool):
    labels = group_labels(train)
    multilevel = isinstance(model, FittedMlogrm)
    if multilevel:
        groups = [g for g in model.group_names if labels is not None and np.any(labels == g)]
    else:
        groups = [None]
    bg = _background(train, plan)
    budget = plan.coalition_budget
    if budget is None:
        budget = default_budget(train.d)
    if budget == 0:
        budget = "exhaustive"

    per_group = {}
    records = []
    for gi, g in enumerate(groups):
        rows = np.flatnonzero(labels == g) if multilevel else np.arange(train.n)
        reps = {"rho": [], "pux": [], "poifs": []}
        for rep in range(plan.repetitions):
            rng = np.random.default_rng([plan.seed, rep, gi])
            k = min(plan.instances_per_repetition, rows.size)
            chosen = np.sort(rng.choice(rows, size=k, replace=False))
            rho, pux, poifs = [], [], []
            for ii, r in enumerate(chosen):
                x = train.X[r]
                ref = intrinsic_attribution(model, x, g)
                sh = _kernel_with_retry(model, x, bg, budget, (plan.seed, rep, gi, ii), g)
                rho.append(rho_order_kpi(ref, sh))
                pux.append(pux_kpi(ref, sh))
                poifs.append(poifs_kpi(ref, sh))
                if keep_records:
                    records.append({"row": int(train.row_ids[r]), "group": g, "repetition": rep,
                                    "intrinsic": ref.to_dict(), "kernel_shapley": sh.to_dict()})
            reps["rho"].append(np.mean(rho))
            reps["pux"].append(np.mean(pux))
            reps["poifs"].append(np.mean(poifs))
        per_group["all" if g is None else g] = {k: (float(np.mean(v)), float(np.std(v)))
                                                for k, v in reps.items()}

    def pack(kpi_id, key):
        means = {g: s[key][0] for g, s in per_group.items()}
        details = {"std_over_repetitions": {g: s[key][1] for g, s in per_group.items()},
                   "method": "kernel_shapley vs intrinsic (log-odds)",
                   "coalitions": budget, "background": plan.background,
                   "repetitions": plan.repetitions,
                   "instances_per_repetition": plan.instances_per_repetition}
        if not multilevel:
            details["std_over_repetitions"] = details["std_over_repetitions"]["all"]
            return kpi.scored(kpi_id, means["all"], details)
        return kpi.scored(kpi_id, means, details)

    results = [pack("3.1.1", "rho"), pack("3.1.2", "pux"), pack("3.1.3", "poifs")]
    return results, records


def _forest_audit(forest: FittedForest, train: Dataset):
    _, phi = tree_shapley_batch(forest, train.X)
    mean_abs = np.abs(phi).mean(axis=0)
    total = mean_abs.sum()
    shap_global = mean_abs / total if total > 0 else np.full(train.d, 1.0 / train.d)
    ref = vim_attribution(forest)
    sh = AttributionVector(0.0, shap_global, PROBABILITY, "tree_shapley_global", forest.feature_names)
    details = {"vim": dict(zip(forest.feature_names, ref.contributions.tolist())),
               "tree_shapley_mean_abs_normalized": dict(zip(forest.feature_names, shap_global.tolist())),
               "rows": train.n}
    results = [
        kpi.scored("3.1.1", rho_order_kpi(ref, sh), details),
        kpi.not_applicable("3.1.2", "global importances sum to one and carry no probability estimate"),
        kpi.scored("3.1.3", poifs_kpi(ref, sh), {"method": "tree_shapley_global vs vim"}),
    ]
    return results


def run_explainability_audit(model, train: Dataset, plan: ExplainabilitySamplingPlan = ExplainabilitySamplingPlan(),
                             keep_records: bool = False) -> ExplainabilityOutcome:
    if isinstance(model, FittedForest):
        return ExplainabilityOutcome(_forest_audit(model, train))
    results, records = _parametric_audit(model, train, plan, keep_records)
    return ExplainabilityOutcome(results, records)


def explain_instance(model, x, group, background, seed_words, budget=None) -> dict:
    """Attribution record for one instance, as written by the ``explain`` command."""
    x = np.asarray(x, dtype=float)
    names = _names(model)
    rec = {"features": dict(zip(names, x.tolist())), "group": group,
           "probability": float(output_fn(model, PROBABILITY, group)(x[None, :])[0])}
    budget = budget or default_budget(x.size)
    if isinstance(model, FittedForest):
        rec["tree_shapley"] = tree_shapley(model, x).to_dict()
        rec["kernel_shapley"] = _kernel_with_retry(model, x, background, budget, seed_words,
                                                   None, PROBABILITY).to_dict()
    else:
        rec["intrinsic"] = intrinsic_attribution(model, x, group).to_dict()
        rec["kernel_shapley"] = _kernel_with_retry(model, x, background, budget, seed_words,
                                                   group).to_dict()
    return rec
