"""JSON export/import of fitted models.

Floats are written with ``repr`` precision, so a model survives a round trip
bit for bit and re-exporting a reloaded model reproduces the same bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .forest import DecisionTree, FittedForest
from .logistic import FittedLogistic
from .mlogrm import FittedMlogrm

SCHEMA_VERSION = 1
_TREE_FIELDS = ("feature", "threshold", "left", "right", "value", "n_samples", "impurity_decrease")


def to_dict(model) -> dict:
    base = {"schema_version": SCHEMA_VERSION, "kind": model.kind,
            "feature_names": list(model.feature_names)}
    if isinstance(model, FittedLogistic):
        base.update(coef=model.coef.tolist(), cov=model.cov.tolist(),
                    iterations=model.iterations, converged=model.converged)
    elif isinstance(model, FittedMlogrm):
        base.update(group_names=list(model.group_names), coef=model.coef.tolist(),
                    cov=model.cov.tolist(), mu=model.mu.tolist(), sigma=model.sigma.tolist(),
                    iterations=model.iterations, converged=model.converged,
                    strict_groups=model.strict_groups)
    elif isinstance(model, FittedForest):
        base.update(features_per_split=model.features_per_split, seed=model.seed,
                    max_depth=model.max_depth, min_leaf=model.min_leaf,
                    trees=[{f: getattr(t, f).tolist() for f in _TREE_FIELDS} for t in model.trees])
    else:
        raise TypeError(f"cannot export {type(model).__name__}")
    return base


def from_dict(doc: dict):
    kind = doc.get("kind")
    names = tuple(doc["feature_names"])
    if kind == "logistic":
        return FittedLogistic(names, np.array(doc["coef"], dtype=float),
                              np.array(doc["cov"], dtype=float), doc["iterations"], doc["converged"])
    if kind == "mlogrm":
        return FittedMlogrm(names, tuple(doc["group_names"]), np.array(doc["coef"], dtype=float),
                            np.array(doc["cov"], dtype=float), np.array(doc["mu"], dtype=float),
                            np.array(doc["sigma"], dtype=float), doc["iterations"],
                            doc["converged"], doc.get("strict_groups", False))
    if kind == "random_forest":
        trees = []
        for t in doc["trees"]:
            trees.append(DecisionTree(
                np.array(t["feature"], dtype=np.int64), np.array(t["threshold"], dtype=float),
                np.array(t["left"], dtype=np.int64), np.array(t["right"], dtype=np.int64),
                np.array(t["value"], dtype=float), np.array(t["n_samples"], dtype=np.int64),
                np.array(t["impurity_decrease"], dtype=float)))
        return FittedForest(names, tuple(trees), doc["features_per_split"], doc["seed"],
                            doc.get("max_depth"), doc.get("min_leaf", 1))
    raise ValueError(f"unknown model kind {kind!r}")


def dumps(model) -> str:
    return json.dumps(to_dict(model), sort_keys=True, separators=(",", ":"))


def save(model, path) -> None:
    Path(path).write_text(dumps(model) + "\n", encoding="utf-8")


def load(path):
    return from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
