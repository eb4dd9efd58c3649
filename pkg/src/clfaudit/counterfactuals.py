"""Mesh-grid counterfactual candidates and the validity/proximity/sparsity/diversity KPIs."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kpi
from .data import Dataset, FeatureStats, feature_stats, group_labels
from .errors import EmptyGrid, NoValidCandidates
from .models import predict_proba

CHANGE_TOL = 1e-9


@dataclass(frozen=True)
class CfGridSpec:
    half_ranges: dict                      # feature -> base half-width
    steps: dict = field(default_factory=dict)   # feature -> step (default 1)
    jitter_max: int = 2                    # half-width gets + integer in [0, jitter_max]
    lower: Optional[np.ndarray] = None     # clamp bounds, one per model feature
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        for f, h in self.half_ranges.items():
            if h < 0:
                raise ValueError(f"half-range of {f!r} must be nonnegative")
        for f, s in self.steps.items():
            if s <= 0:
                raise ValueError(f"step of {f!r} must be positive")
        if self.jitter_max < 0:
            raise ValueError("jitter_max must be nonnegative")

    def step(self, name: str) -> float:
        return float(self.steps.get(name, 1.0))

    def clamped_to(self, train: Dataset) -> "CfGridSpec":
        st = feature_stats(train)
        return CfGridSpec(dict(self.half_ranges), dict(self.steps), self.jitter_max, st.min, st.max)


@dataclass(frozen=True, eq=False)
class CfCandidateSet:
    origin: np.ndarray
    candidates: np.ndarray    # (k, d)
    validity: np.ndarray      # (k,) bool, predicted probability > 0.5
    group: Optional[str] = None
    row_id: Optional[int] = None

    @property
    def k(self) -> int:
        return self.candidates.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return self.candidates[self.validity]


def grid_axes(x, names, spec: CfGridSpec, rng: np.random.Generator) -> list[np.ndarray]:
    axes = []
    for p, name in enumerate(names):
        if name not in spec.half_ranges:
            axes.append(np.array([x[p]]))
            continue
        half = spec.half_ranges[name] + int(rng.integers(0, spec.jitter_max + 1))
        step = spec.step(name)
        n = int(np.floor(half / step + 1e-9))
        ax = x[p] + step * np.arange(-n, n + 1)
        if spec.lower is not None:
            ax = ax[(ax >= spec.lower[p] - 1e-12) & (ax <= spec.upper[p] + 1e-12)]
        if ax.size == 0:
            raise EmptyGrid(f"clamping removed every grid value of {name!r}")
        axes.append(ax)
    return axes


def generate_meshgrid_cfs(model, x, names, spec: CfGridSpec, seed, group=None,
                          row_id=None) -> CfCandidateSet:
    """Cartesian grid around ``x`` without ``x`` itself, scored by the model."""
    x = np.asarray(x, dtype=float)
    if float(predict_proba(model, x[None, :], None if group is None else [group])[0]) > 0.5:
        raise ValueError("counterfactuals are generated for class-0 instances only")
    rng = np.random.default_rng(seed)
    axes = grid_axes(x, names, spec, rng)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, x.size)
    mesh = mesh[np.any(np.abs(mesh - x) > CHANGE_TOL, axis=1)]
    if mesh.shape[0] == 0:
        raise EmptyGrid("grid holds nothing but the origin")
    p = predict_proba(model, mesh, None if group is None else group)
    return CfCandidateSet(x, mesh, p > 0.5, group, row_id)


# ------------------------------------------------------------ KPIs

def pvcf(sets) -> float:
    if not sets:
        raise ValueError("PVCF needs at least one candidate set")
    return float(np.mean([100.0 * s.validity.sum() / s.k for s in sets]))


def safe_mad(stats: FeatureStats) -> np.ndarray:
    mad = stats.mad.astype(float).copy()
    zero = mad <= 0
    if zero.any():
        warnings.warn("zero mean absolute deviation for some features; using 1 instead",
                      RuntimeWarning, stacklevel=3)
        mad[zero] = 1.0
    return mad


def minmax_mean(raw: np.ndarray) -> float:
    """Min-max scale across instances, then average; a flat vector scales to 0.5."""
    lo, hi = raw.min(), raw.max()
    if hi - lo <= 0:
        return 0.5
    return float(np.mean((raw - lo) / (hi - lo)))


def _usable(sets, need: int):
    out = []
    for s in sets:
        if s.validity.sum() >= need:
            out.append(s)
    skipped = len(sets) - len(out)
    if skipped:
        warnings.warn(f"{skipped} candidate set(s) skipped: fewer than {need} valid candidate(s)",
                      RuntimeWarning, stacklevel=3)
    if not out:
        raise NoValidCandidates(f"no candidate set has {need} or more valid candidates")
    return out


def dist_cont(a, b, mad, cont) -> np.ndarray:
    """Mean MAD-scaled absolute gap over continuous columns; rows of ``a`` against ``b``."""
    gap = np.abs(np.atleast_2d(a)[:, cont] - np.asarray(b)[cont]) / mad[cont]
    return gap.mean(axis=1)


def dist_cat(a, b, cont) -> np.ndarray:
    cat = ~cont
    return (np.abs(np.atleast_2d(a)[:, cat] - np.asarray(b)[cat]) > CHANGE_TOL).mean(axis=1)


def pcf_raw(sets, mad, cont) -> np.ndarray:
    return np.array([-dist_cont(s.valid, s.origin, mad, cont).mean() for s in sets])


def pcf(sets, stats: FeatureStats, cont: np.ndarray) -> float:
    used = _usable(sets, 1)
    return minmax_mean(pcf_raw(used, safe_mad(stats), np.asarray(cont, bool)))


def pcf_categorical(sets, cont: np.ndarray) -> Optional[float]:
    cont = np.asarray(cont, bool)
    if cont.all():
        return None
    used = _usable(sets, 1)
    return float(np.mean([1.0 - dist_cat(s.valid, s.origin, cont).mean() for s in used]))


def scf_one(s: CfCandidateSet) -> float:
    changed = np.abs(s.valid - s.origin) > CHANGE_TOL
    return 1.0 - changed.sum() / changed.size


def scf(sets) -> float:
    return float(np.mean([scf_one(s) for s in _usable(sets, 1)]))


def _pairwise_abs_sum(v: np.ndarray) -> float:
    """sum_{i<j} |v_i - v_j| in O(n log n)."""
    v = np.sort(v)
    n = v.size
    return float(np.sum(v * (2 * np.arange(n) - n + 1)))


def dcf_raw_one(s: CfCandidateSet, mad, cont) -> float:
    C = s.valid
    cols = np.flatnonzero(cont)
    total = sum(_pairwise_abs_sum(C[:, p]) / mad[p] for p in cols) / cols.size
    return total / C.shape[0] ** 2


def dcf(sets, stats: FeatureStats, cont: np.ndarray) -> float:
    cont = np.asarray(cont, bool)
    used = _usable(sets, 2)
    mad = safe_mad(stats)
    return minmax_mean(np.array([dcf_raw_one(s, mad, cont) for s in used]))


# ------------------------------------------------------ audit driver

@dataclass
class CounterfactualOutcome:
    results: list
    sets: list
    skipped: dict


def run_counterfactual_audit(model, train: Dataset, test: Dataset, spec: CfGridSpec, seed: int):
    """Grid counterfactuals for every class-0 test row and the four KPIs."""
    spec = spec.clamped_to(train) if spec.lower is None else spec
    names = train.feature_names
    labels = group_labels(test)
    p = predict_proba(model, test.X, labels)
    sets, skipped = [], {}
    for r in np.flatnonzero(p <= 0.5):
        g = None if labels is None else labels[r]
        try:
            sets.append(generate_meshgrid_cfs(model, test.X[r], names, spec, [seed, int(test.row_ids[r])],
                                              g, int(test.row_ids[r])))
        except EmptyGrid as exc:
            skipped[int(test.row_ids[r])] = str(exc)

    ids = ("3.2.1", "3.2.2", "3.2.3", "3.2.4")
    if not sets:
        reason = "no class-0 test instance produced a candidate grid"
        return CounterfactualOutcome([kpi.not_applicable(k, reason) for k in ids], sets, skipped)

    stats = feature_stats(train)
    cont = train.continuous_mask()
    common = {"instances": len(sets), "candidates_per_instance_mean": float(np.mean([s.k for s in sets])),
              "skipped_instances": skipped}
    results = [kpi.scored("3.2.1", pvcf(sets), common)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for kpi_id, fn in (("3.2.2", lambda: pcf(sets, stats, cont)),
                           ("3.2.3", lambda: scf(sets)),
                           ("3.2.4", lambda: dcf(sets, stats, cont))):
            try:
                value = fn()
                details = {"candidates": "valid only", "scaling": "min-max across instances"}
                if kpi_id == "3.2.2":
                    cat = pcf_categorical(sets, cont)
                    if cat is not None:
                        details["pcf_categorical"] = cat
                if kpi_id == "3.2.3":
                    details.pop("scaling")
                results.append(kpi.scored(kpi_id, value, details))
            except NoValidCandidates as exc:
                results.append(kpi.not_applicable(kpi_id, str(exc)))
    notes = sorted({str(w.message) for w in caught})
    if notes:
        for r in results[1:]:
            r.details.setdefault("warnings", notes)
    return CounterfactualOutcome(results, sets, skipped)


def dump_sets(sets, names, path) -> Path:
    """Per-instance evidence: origin, candidates and their validity."""
    doc = [{"row": s.row_id, "group": s.group,
            "origin": dict(zip(names, s.origin.tolist())),
            "candidates": s.candidates.tolist(), "valid": s.validity.astype(int).tolist()}
           for s in sets]
    path = Path(path)
    path.write_text(json.dumps({"features": list(names), "sets": doc}, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path
