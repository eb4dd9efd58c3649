import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clfaudit import kpi
from clfaudit.data import from_arrays
from clfaudit.errors import EmptyCell, EmptyGroup, ZeroDenominator
from clfaudit.fairness import (GroupFairnessInput, diff_ind, diff_ind_grp, disparate_impact,
                               disparate_impact_ratios, equalized_odds, equalized_odds_per_group,
                               find_similar_pairs, group_fairness_kpis, individual_fairness_kpis,
                               statistical_parity)
from clfaudit.models import FittedMlogrm


class ProbIsFirstFeature:
    """Stub model whose P(y=1) is the first feature, optionally shifted per group."""

    feature_names = ("p", "z")

    def __init__(self, shift=None):
        self.shift = shift or {}

    def predict_proba(self, X, groups=None):
        X = np.atleast_2d(X)
        out = X[:, 0].astype(float).copy()
        if groups is not None:
            out += np.array([self.shift.get(g, 0.0) for g in np.broadcast_to(np.asarray(groups, dtype=object), len(X))])
        return out


def _inp(pred_priv, pred_unpriv, y_priv=None, y_unpriv=None, groups=None):
    y_priv = pred_priv if y_priv is None else y_priv
    y_unpriv = pred_unpriv if y_unpriv is None else y_unpriv
    return GroupFairnessInput(np.r_[y_priv, y_unpriv], np.r_[pred_priv, pred_unpriv],
                              np.r_[np.ones(len(pred_priv)), np.zeros(len(pred_unpriv))], groups)


def test_sp_examples():
    assert statistical_parity(_inp([1, 0], [0, 1])) == 0.0
    assert statistical_parity(_inp([1, 0], [1, 0, 0, 0])) == 0.25


def test_di_examples():
    assert disparate_impact(_inp([1, 0], [0, 1])) == 1.0
    inp = _inp([1] * 5 + [0] * 5, [1] * 4 + [0] * 6)
    assert disparate_impact(inp) == pytest.approx(0.8)
    assert disparate_impact_ratios(inp)[1] == pytest.approx(1.25)


def test_di_zero_privileged_rate():
    with pytest.raises(ZeroDenominator):
        disparate_impact(_inp([0, 0], [1, 0]))


def test_missing_sensitive_group():
    with pytest.raises(EmptyGroup):
        GroupFairnessInput([1, 0], [1, 0], [1, 1])


def test_equal_odds_examples():
    perfect = _inp([1, 0, 1, 0], [0, 1, 1, 0])
    assert equalized_odds(perfect) == 0.0
    # privileged: TPR 9/10, FPR 2/10; unprivileged: TPR 7/10, FPR 4/10
    y = np.r_[[1] * 10, [0] * 10]
    pp = np.r_[[1] * 9, [0], [1] * 2, [0] * 8]
    pu = np.r_[[1] * 7, [0] * 3, [1] * 4, [0] * 6]
    assert equalized_odds(_inp(pp, pu, y, y)) == pytest.approx(0.2)


def test_equal_odds_empty_cell():
    with pytest.raises(EmptyCell):
        equalized_odds(_inp([1, 1], [1, 0], [1, 1], [1, 0]))


def test_equal_odds_per_group_skips_slices():
    y = np.array([1, 0, 1, 0, 1, 1, 1, 1])
    pred = np.array([1, 0, 1, 0, 1, 1, 1, 1])
    s = np.array([1, 1, 0, 0, 1, 1, 0, 0])
    g = np.array(["a"] * 4 + ["b"] * 4, dtype=object)
    with pytest.warns(RuntimeWarning):
        values, skipped = equalized_odds_per_group(GroupFairnessInput(y, pred, s, g))
    assert values == {"a": 0.0}
    assert "b" in skipped


def test_symmetric_predictions_give_exact_zeros():
    block = np.array([1, 1, 0, 0, 1, 0])
    truth = np.array([1, 0, 0, 1, 1, 0])
    inp = _inp(block, block, truth, truth)
    assert statistical_parity(inp) == 0.0
    assert disparate_impact(inp) == 1.0
    assert equalized_odds(inp) == 0.0


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=40))
@settings(max_examples=80, deadline=None)
def test_group_metrics_bounded(rows):
    y = np.array([r[0] for r in rows] * 2)
    pred = np.array([r[1] for r in rows] * 2)
    s = np.r_[np.ones(len(rows)), np.zeros(len(rows))]
    inp = GroupFairnessInput(y, pred[::-1].copy(), s)
    assert 0.0 <= statistical_parity(inp) <= 1.0
    try:
        assert 0.0 <= disparate_impact(inp) <= 1.0
    except ZeroDenominator:
        pass


# ------------------------------------------------------------ pairs

def _pairs_data(X, groups=None):
    return from_arrays(X, np.zeros(len(X), int), [f"f{i}" for i in range(X.shape[1])], groups=groups)


def test_duplicate_row_pair_first():
    X = np.array([[0.0, 1.0], [2.0, 2.0], [0.0, 1.0], [2.1, 2.0]])
    pairs = find_similar_pairs(_pairs_data(X), 1.0)
    assert (pairs[0].index_i, pairs[0].index_j, pairs[0].distance) == (0, 2, 0.0)


def test_tiny_epsilon_on_distinct_rows():
    X = np.random.default_rng(0).normal(size=(20, 2))
    assert find_similar_pairs(_pairs_data(X), 1e-12) == []


def test_pairs_against_brute_force():
    r = np.random.default_rng(1)
    X = r.normal(size=(10, 3))
    Z = (X - X.mean(0)) / X.std(0)
    expect = sorted((float(np.linalg.norm(Z[i] - Z[j])), i, j)
                    for i in range(10) for j in range(i + 1, 10)
                    if np.linalg.norm(Z[i] - Z[j]) <= 0.5 + 0.0)
    got = [(p.distance, p.index_i, p.index_j) for p in find_similar_pairs(_pairs_data(X), 0.5)]
    assert [(i, j) for _, i, j in got] == [(i, j) for _, i, j in expect]
    np.testing.assert_allclose([d for d, *_ in got], [d for d, *_ in expect], atol=1e-12)


def test_pair_modes_respect_groups():
    r = np.random.default_rng(2)
    X = r.normal(size=(30, 2))
    g = np.arange(30) % 3
    d = _pairs_data(X, g)
    for p in find_similar_pairs(d, 1.5, "intra"):
        assert g[p.index_i] == g[p.index_j]
    inter = find_similar_pairs(d, 1.5, "inter", between=("0", "1"))
    assert inter and all({g[p.index_i], g[p.index_j]} == {0, 1} for p in inter)


# ---------------------------------------------------------- ratio gaps

def test_diff_ind_examples():
    m = ProbIsFirstFeature()
    x = np.array([0.3, 1.0])
    assert diff_ind(m, x, x) == 0.0
    assert diff_ind(m, [0.46, 0.0], [0.40, 0.0]) == pytest.approx(0.15)


def test_diff_ind_zero_reference():
    with pytest.raises(ZeroDenominator):
        diff_ind(ProbIsFirstFeature(), [0.5, 0], [0.0, 0])


def test_diff_ind_grp_examples():
    m = ProbIsFirstFeature({"ne": 0.13})
    x = np.array([0.5, 0.0])
    assert diff_ind_grp(m, x, "ne", x, "se") == pytest.approx(0.26)


def test_diff_ind_grp_identical_groups_is_zero():
    coef = np.tile([0.2, 0.5, -0.1], (2, 1))
    m = FittedMlogrm(("a", "b"), ("g1", "g2"), coef, np.zeros((2, 3, 3)), coef[0], np.zeros(3), 1, True)
    assert diff_ind_grp(m, [1.0, 2.0], "g1", [1.0, 2.0], "g2") == 0.0


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_diff_ind_nonnegative(a, b):
    assert diff_ind(ProbIsFirstFeature(), [a, 0], [b, 0]) >= 0.0


# ---------------------------------------------------------------- KPIs

def test_group_kpis_on_synthetic(mlogrm_model, insurance_split):
    res = {r.kpi_id: r for r in group_fairness_kpis(mlogrm_model, insurance_split.test)}
    assert set(res) == {"2.1.1", "2.1.2a", "2.1.2b"}
    assert isinstance(res["2.1.1"].values, dict)
    di = res["2.1.2a"]
    assert di.values == pytest.approx(min(di.details["unprivileged_over_privileged"],
                                          di.details["privileged_over_unprivileged"]))


def test_group_kpis_without_sensitive(toy_logistic):
    d = from_arrays(np.zeros((4, 3)), [0, 1, 0, 1], ["x0", "x1", "x2"])
    for r in group_fairness_kpis(toy_logistic, d):
        assert r.applicability == kpi.NOT_APPLICABLE


def test_individual_kpis(small_forest, insurance_split):
    res = individual_fairness_kpis(small_forest, insurance_split.train, 0.25)
    assert [r.kpi_id for r in res] == ["2.2.1", "2.2.2"]
    for r in res:
        if r.is_applicable:
            assert r.details["n_pairs"] > 0 and r.details["max"] >= r.values >= 0
