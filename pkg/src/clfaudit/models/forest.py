"""Random forest of CART trees grown on Gini impurity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .. import _kernels


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Flat array tree; node 0 is the root, children always follow their parent."""

    feature: np.ndarray            # -1 marks a leaf
    threshold: np.ndarray          # go left when x[feature] <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray              # class-1 fraction of the node's training rows
    n_samples: np.ndarray
    impurity_decrease: np.ndarray  # sample-weighted Gini decrease, relative to the root size

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def structurally_equal(self, other: "DecisionTree") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("feature", "threshold", "left", "right", "value", "n_samples"))

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return _kernels.forest_predict(self.feature, self.threshold, self.left, self.right,
                                       self.value, np.zeros(1, dtype=np.int64), X)

    def importances(self, d: int) -> np.ndarray:
        imp = np.zeros(d)
        internal = self.feature >= 0
        np.add.at(imp, self.feature[internal], self.impurity_decrease[internal])
        return imp


def _gini_sum(n: float, c: float) -> float:
    """n * Gini for a node with n rows of which c are positive."""
    return 0.0 if n == 0 else 2.0 * c * (n - c) / n


def grow_tree(X, y, rng, max_features, max_depth=None, min_leaf=1) -> DecisionTree:
    """Grow one CART tree on all rows of ``X``; ``rng`` drives the feature draws."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n_root, d = X.shape
    feature, threshold, left, right, value, count, decrease = [], [], [], [], [], [], []
    parent_slot = []  # (parent node, 0 for left / 1 for right)
    stack = [(np.arange(n_root, dtype=np.int64), 0, -1, 0)]
    while stack:
        idx, depth, parent, side = stack.pop()
        node = len(feature)
        if parent >= 0:
            (left if side == 0 else right)[parent] = node
        n = idx.size
        c = float(y[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(c / n)
        count.append(n)
        decrease.append(0.0)
        parent_slot.append(parent)
        if c == 0 or c == n or n < 2 * min_leaf or (max_depth is not None and depth >= max_depth):
            continue
        order = rng.permutation(d)
        first = np.sort(order[:max_features])
        f, thr, score = _kernels.best_split(X, y, idx, first, min_leaf)
        rest = iter(order[max_features:])
        while f < 0:
            nxt = next(rest, None)
            if nxt is None:
                break
            f, thr, score = _kernels.best_split(X, y, idx, np.array([nxt]), min_leaf)
        if f < 0:
            continue
        feature[node] = int(f)
        threshold[node] = float(thr)
        decrease[node] = (_gini_sum(n, c) - score) / n_root
        go_left = X[idx, f] <= thr
        # right pushed first so the left subtree is numbered first
        stack.append((idx[~go_left], depth + 1, node, 1))
        stack.append((idx[go_left], depth + 1, node, 0))
    return DecisionTree(
        np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64), np.array(value), np.array(count, dtype=np.int64),
        np.array(decrease),
    )


@dataclass(frozen=True, eq=False)
class FittedForest:
    feature_names: tuple
    trees: tuple
    features_per_split: int
    seed: int
    max_depth: int | None = None
    min_leaf: int = 1

    kind = "random_forest"

    @cached_property
    def packed(self) -> dict:
        """All trees concatenated with absolute child indices, for the kernels."""
        offs = np.cumsum([0] + [t.n_nodes for t in self.trees])
        cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])
        left = np.concatenate([np.where(t.left >= 0, t.left + o, -1)
                               for t, o in zip(self.trees, offs)])
        right = np.concatenate([np.where(t.right >= 0, t.right + o, -1)
                                for t, o in zip(self.trees, offs)])
        return dict(
            feature=np.ascontiguousarray(cat("feature"), dtype=np.int64),
            threshold=np.ascontiguousarray(cat("threshold"), dtype=np.float64),
            left=np.ascontiguousarray(left, dtype=np.int64),
            right=np.ascontiguousarray(right, dtype=np.int64),
            value=np.ascontiguousarray(cat("value"), dtype=np.float64),
            cover=np.ascontiguousarray(cat("n_samples"), dtype=np.float64),
            roots=np.ascontiguousarray(offs[:-1], dtype=np.int64),
            ends=np.ascontiguousarray(offs[1:], dtype=np.int64),
        )

    def predict_proba(self, X, groups=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        pk = self.packed
        return _kernels.forest_predict(pk["feature"], pk["threshold"], pk["left"], pk["right"],
                                       pk["value"], pk["roots"], X)

    def vim(self) -> np.ndarray:
        d = len(self.feature_names)
        acc = np.zeros(d)
        for t in self.trees:
            imp = t.importances(d)
            s = imp.sum()
            if s > 0:
                acc += imp / s
        total = acc.sum()
        if total == 0:
            return np.full(d, 1.0 / d)
        return acc / total


def fit_random_forest(train, n_trees: int = 200, max_depth=None, min_leaf: int = 1,
                      seed: int = 0, max_features=None) -> FittedForest:
    """Bagged CART trees; tree ``t`` draws from ``default_rng([seed, t])``."""
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X = np.ascontiguousarray(train.X, dtype=np.float64)
    y = np.ascontiguousarray(train.y, dtype=np.int64)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot fit a forest on empty data")
    m = max_features or math.ceil(math.sqrt(d))
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        boot = rng.integers(0, n, size=n)
        trees.append(grow_tree(X[boot], y[boot], rng, m, max_depth, min_leaf))
    return FittedForest(tuple(train.feature_names), tuple(trees), m, seed, max_depth, min_leaf)
