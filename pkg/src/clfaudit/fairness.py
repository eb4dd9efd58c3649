"""Group and individual fairness KPIs."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kpi
from .data import Dataset, group_labels
from .errors import EmptyCell, EmptyGroup, LengthMismatch, NotApplicable, ZeroDenominator
from .models import predict_proba

PROB_FLOOR = 1e-12
PAIR_BLOCK = 2048


@dataclass(frozen=True)
class GroupFairnessInput:
    y_true: np.ndarray
    y_pred: np.ndarray
    sensitive: np.ndarray          # 1 = privileged
    groups: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("y_true", "y_pred", "sensitive"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)).astype(np.int64))
        n = self.y_true.shape[0]
        if self.y_pred.shape != (n,) or self.sensitive.shape != (n,):
            raise LengthMismatch("y_true, y_pred and sensitive must have equal length")
        if self.groups is not None:
            object.__setattr__(self, "groups", np.asarray(self.groups, dtype=object))
            if self.groups.shape != (n,):
                raise LengthMismatch("group labels must match the other vectors")
        present = set(np.unique(self.sensitive).tolist())
        if present != {0, 1}:
            raise EmptyGroup(f"both sensitive groups must be present (found {sorted(present)})")

    def slice(self, mask) -> "GroupFairnessInput":
        """Sub-input for a row mask; raises EmptyGroup if a sensitive value vanishes."""
        return GroupFairnessInput(self.y_true[mask], self.y_pred[mask], self.sensitive[mask])


def _positive_rates(inp: GroupFairnessInput) -> tuple[float, float]:
    priv = inp.sensitive == 1
    return float(inp.y_pred[priv].mean()), float(inp.y_pred[~priv].mean())


def statistical_parity(inp: GroupFairnessInput) -> float:
    r1, r0 = _positive_rates(inp)
    return abs(r1 - r0)


def disparate_impact_ratios(inp: GroupFairnessInput) -> tuple[float, float]:
    """(unprivileged / privileged, privileged / unprivileged); inf when a rate is zero."""
    r1, r0 = _positive_rates(inp)
    if r1 == 0.0:
        raise ZeroDenominator("privileged group has no positive predictions")
    return r0 / r1, (r1 / r0 if r0 > 0 else np.inf)


def disparate_impact(inp: GroupFairnessInput) -> float:
    """The smaller of the two rate ratios, so 1 means parity whichever side is favoured."""
    a, b = disparate_impact_ratios(inp)
    return min(a, b)


def _rate(y_pred, cell) -> float:
    if not cell.any():
        raise EmptyCell("a (sensitive, label) cell is empty in this slice")
    return float(y_pred[cell].mean())


def equalized_odds(inp: GroupFairnessInput) -> float:
    """Half the sum of the absolute TPR and FPR gaps between sensitive groups."""
    s, y, yp = inp.sensitive == 1, inp.y_true == 1, inp.y_pred
    tpr_gap = abs(_rate(yp, s & y) - _rate(yp, ~s & y))
    fpr_gap = abs(_rate(yp, s & ~y) - _rate(yp, ~s & ~y))
    return 0.5 * (tpr_gap + fpr_gap)


def equalized_odds_per_group(inp: GroupFairnessInput) -> tuple[dict, dict]:
    """EqualOdds per group slice, plus the slices skipped and why."""
    if inp.groups is None:
        raise ValueError("no group labels to slice by")
    values, skipped = {}, {}
    for g in sorted(set(inp.groups.tolist())):
        try:
            values[g] = equalized_odds(inp.slice(inp.groups == g))
        except (EmptyCell, EmptyGroup) as exc:
            skipped[g] = str(exc)
            warnings.warn(f"EqualOdds slice {g!r} skipped: {exc}", RuntimeWarning, stacklevel=2)
    return values, skipped


# ------------------------------------------------------- individual

@dataclass(frozen=True)
class SimilarPair:
    index_i: int
    index_j: int
    distance: float
    same_group: bool


def _zscore(X: np.ndarray) -> np.ndarray:
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)  # constant columns contribute zero distance
    return (X - X.mean(axis=0)) / sd


def distance_columns(d: Dataset, mode: str) -> np.ndarray:
    """Feature columns entering the similarity distance.

    The sensitive attribute never does. In inter-group mode the group column
    is dropped too when it doubles as a feature, since it differs by design.
    """
    drop = {d.schema.sensitive}
    if mode == "inter":
        drop.add(d.schema.group)
    return np.array([i for i, f in enumerate(d.feature_names) if f not in drop], dtype=np.intp)


def find_similar_pairs(d: Dataset, epsilon: float, mode: str = "intra", between=None) -> list[SimilarPair]:
    """Pairs within ``epsilon`` in z-scored Euclidean distance, closest first.

    ``intra`` pairs rows sharing a group (all rows when there are no groups).
    ``inter`` pairs rows from different groups, restricted to the two names
    in ``between`` when given.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if mode not in ("intra", "inter"):
        raise ValueError(f"unknown pairing mode {mode!r}")
    labels = group_labels(d)
    if mode == "inter" and labels is None:
        raise ValueError("inter-group pairs need a group column")
    cols = distance_columns(d, mode)
    Z = _zscore(d.X[:, cols]) if cols.size else np.zeros((d.n, 0))
    if labels is None:
        labels = np.zeros(d.n, dtype=object)

    if mode == "inter" and between is not None:
        a, b = between
        if a == b:
            raise ValueError("inter-group pairing needs two different groups")
        keep = np.isin(labels, [a, b])
    else:
        keep = np.ones(d.n, dtype=bool)

    found = []
    eps2 = float(epsilon) ** 2
    idx_all = np.flatnonzero(keep)
    for start in range(0, idx_all.size, PAIR_BLOCK):
        rows = idx_all[start:start + PAIR_BLOCK]
        diff = Z[rows][:, None, :] - Z[idx_all][None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        same = labels[rows][:, None] == labels[idx_all][None, :]
        ok = (d2 <= eps2) & (rows[:, None] < idx_all[None, :])
        ok &= same if mode == "intra" else ~same
        for r, c in zip(*np.nonzero(ok)):
            found.append(SimilarPair(int(rows[r]), int(idx_all[c]), float(np.sqrt(d2[r, c])),
                                     bool(same[r, c])))
    found.sort(key=lambda p: (p.distance, p.index_i, p.index_j))
    return found


def _class_prob(model, x, group, y: int) -> float:
    p1 = float(predict_proba(model, np.atleast_2d(x), None if group is None else [group])[0])
    return p1 if y == 1 else 1.0 - p1


def _ratio_gap(pi: float, pj: float) -> float:
    if pj < PROB_FLOOR:
        raise ZeroDenominator(f"reference probability {pj:.3g} is numerically zero")
    return abs(pi / pj - 1.0)


def diff_ind(model, x_i, x_j, y: int = 1, group=None) -> float:
    """Relative gap in P(class y) between two individuals of the same group."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i is x_j or np.array_equal(x_i, x_j):
        return 0.0
    return _ratio_gap(_class_prob(model, x_i, group, y), _class_prob(model, x_j, group, y))


def diff_ind_grp(model, x_i, group_a, x_j, group_b, y: int = 1) -> float:
    """Same ratio gap for individuals scored under two different groups."""
    if group_a == group_b:
        raise ValueError("inter-group comparison needs two different groups")
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if not np.array_equal(x_i, x_j):
        warnings.warn("inter-group comparison of individuals with different features",
                      RuntimeWarning, stacklevel=2)
    return _ratio_gap(_class_prob(model, x_i, group_a, y), _class_prob(model, x_j, group_b, y))


# ----------------------------------------------------------- KPIs

def _fairness_input(model, test: Dataset) -> GroupFairnessInput:
    if test.sensitive is None:
        raise NotApplicable("no sensitive attribute configured")
    labels = group_labels(test)
    y_pred = (predict_proba(model, test.X, labels) >= 0.5).astype(int)
    return GroupFairnessInput(test.y, y_pred, test.sensitive, labels)


def group_fairness_kpis(model, test: Dataset, equal_odds: str = "per_group") -> list[kpi.KpiResult]:
    """EqualOdds, DI and SP on the test predictions.

    ``equal_odds`` is ``per_group`` (a map scored group by group),
    ``mean`` (the average over group slices) or ``pooled`` (one value).
    """
    try:
        inp = _fairness_input(model, test)
    except (NotApplicable, EmptyGroup) as exc:
        reason = getattr(exc, "reason", str(exc))
        return [kpi.not_applicable(k, reason) for k in ("2.1.1", "2.1.2a", "2.1.2b")]

    out = []
    if equal_odds == "pooled" or inp.groups is None:
        try:
            out.append(kpi.scored("2.1.1", equalized_odds(inp), {"aggregation": "pooled"}))
        except EmptyCell as exc:
            out.append(kpi.not_applicable("2.1.1", exc.reason))
    else:
        values, skipped = equalized_odds_per_group(inp)
        details = {"aggregation": equal_odds, "skipped_slices": skipped}
        if not values:
            out.append(kpi.not_applicable("2.1.1", "every group slice has an empty cell", details))
        elif equal_odds == "mean":
            details["per_group"] = values
            out.append(kpi.scored("2.1.1", float(np.mean(list(values.values()))), details))
        elif equal_odds == "per_group":
            out.append(kpi.scored("2.1.1", values, details))
        else:
            raise ValueError(f"unknown EqualOdds aggregation {equal_odds!r}")

    r1, r0 = _positive_rates(inp)
    rates = {"privileged_positive_rate": r1, "unprivileged_positive_rate": r0}
    try:
        u_over_p, p_over_u = disparate_impact_ratios(inp)
        out.append(kpi.scored("2.1.2a", min(u_over_p, p_over_u),
                              {**rates, "unprivileged_over_privileged": u_over_p,
                               "privileged_over_unprivileged": p_over_u}))
    except ZeroDenominator as exc:
        out.append(kpi.not_applicable("2.1.2a", exc.reason, rates))
    out.append(kpi.scored("2.1.2b", statistical_parity(inp), rates))
    return out


def _pair_gaps(p: np.ndarray, pairs: list[SimilarPair]) -> tuple[np.ndarray, int]:
    i = np.array([q.index_i for q in pairs], dtype=np.intp)
    j = np.array([q.index_j for q in pairs], dtype=np.intp)
    ok = p[j] >= PROB_FLOOR
    return np.abs(p[i[ok]] / p[j[ok]] - 1.0), int((~ok).sum())


def individual_fairness_kpis(model, data: Dataset, epsilon: float = 0.25, target_class: int = 1,
                             probes: Optional[list] = None) -> list[kpi.KpiResult]:
    """Diff_Ind over intra-group similar pairs and Diff_Ind_GRP over inter-group ones.

    Each dataset-level value is the mean ratio gap over all pairs within
    ``epsilon``; the maximum and pair counts go to the details. ``probes``
    are explicit (x_i, group_i, x_j, group_j) comparisons reported alongside.
    """
    labels = group_labels(data)
    p1 = predict_proba(model, data.X, labels)
    p = p1 if target_class == 1 else 1.0 - p1
    results = []
    probe_rows = _run_probes(model, probes or [], target_class)

    for kpi_id, mode in (("2.2.1", "intra"), ("2.2.2", "inter")):
        base = {"epsilon": epsilon, "target_class": target_class,
                "distance": "euclidean on z-scored non-sensitive features"}
        picked = [r for r in probe_rows if r["kind"] == mode]
        if picked:
            base["probes"] = picked
        if mode == "inter" and labels is None:
            results.append(kpi.not_applicable(kpi_id, "no group column to compare across", base))
            continue
        pairs = find_similar_pairs(data, epsilon, mode)
        if not pairs:
            results.append(kpi.not_applicable(kpi_id, f"no pairs within epsilon={epsilon}", base))
            continue
        gaps, dropped = _pair_gaps(p, pairs)
        if gaps.size == 0:
            results.append(kpi.not_applicable(kpi_id, "all reference probabilities are zero", base))
            continue
        base.update(n_pairs=int(gaps.size), max=float(gaps.max()), zero_reference_pairs=dropped)
        results.append(kpi.scored(kpi_id, float(gaps.mean()), base))
    return results


def _run_probes(model, probes, target_class) -> list[dict]:
    out = []
    for pr in probes:
        x_i, x_j = np.asarray(pr["x_i"], dtype=float), np.asarray(pr["x_j"], dtype=float)
        g_i, g_j = pr.get("group_i"), pr.get("group_j")
        rec = {"x_i": x_i.tolist(), "x_j": x_j.tolist(), "group_i": g_i, "group_j": g_j}
        try:
            if g_i is not None and g_j is not None and g_i != g_j:
                rec["kind"] = "inter"
                rec["value"] = diff_ind_grp(model, x_i, g_i, x_j, g_j, target_class)
            else:
                rec["kind"] = "intra"
                rec["value"] = diff_ind(model, x_i, x_j, target_class, g_i)
        except ZeroDenominator as exc:
            rec["value"] = None
            rec["reason"] = exc.reason
        out.append(rec)
    return out
