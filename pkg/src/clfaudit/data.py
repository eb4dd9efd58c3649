"""CSV ingestion, target binarisation and the stratified train/test split."""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyDataset, GroupTooSmall, MissingColumn, ParseError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class TargetRule:
    threshold: float
    direction: str = "greater"  # "greater" -> y = value > threshold

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValueError("target threshold must be finite")
        if self.direction not in ("greater", "less"):
            raise ValueError(f"unknown target direction {self.direction!r}")

    def apply(self, values: np.ndarray) -> np.ndarray:
        if self.direction == "greater":
            return (values > self.threshold).astype(np.int64)
        return (values < self.threshold).astype(np.int64)


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[str, ...]
    target: str
    target_rule: TargetRule
    kinds: dict = field(default_factory=dict)  # name -> continuous|categorical
    group: Optional[str] = None
    sensitive: Optional[str] = None
    privileged_value: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if len(set(self.features)) != len(self.features):
            raise ValueError("feature names must be unique")
        if self.target in self.features:
            raise ValueError("target column cannot also be a feature")
        if self.sensitive is not None and self.privileged_value is None:
            raise ValueError("sensitive column needs a privileged value")
        for name, kind in self.kinds.items():
            if kind not in (CONTINUOUS, CATEGORICAL):
                raise ValueError(f"feature {name!r}: unknown kind {kind!r}")

    def kind(self, name: str) -> str:
        return self.kinds.get(name, CONTINUOUS)

    @property
    def columns(self) -> list[str]:
        cols = list(self.features) + [self.target]
        for extra in (self.group, self.sensitive):
            if extra is not None and extra not in cols:
                cols.append(extra)
        return cols


@dataclass(frozen=True, eq=False)
class Dataset:
    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray
    groups: Optional[np.ndarray] = None
    group_names: tuple = ()
    sensitive: Optional[np.ndarray] = None
    category_maps: dict = field(default_factory=dict)
    row_ids: Optional[np.ndarray] = None
    dropped: int = 0

    def __post_init__(self):
        n = self.X.shape[0]
        if self.y.shape != (n,):
            raise ValueError("X and y lengths differ")
        if n and not np.isin(self.y, (0, 1)).all():
            raise ValueError("y must be binary")
        if self.groups is not None and self.groups.shape != (n,):
            raise ValueError("group labels length differs from X")
        if self.sensitive is not None and self.sensitive.shape != (n,):
            raise ValueError("sensitive indicator length differs from X")
        if self.row_ids is None:
            object.__setattr__(self, "row_ids", np.arange(n))
        for arr in (self.X, self.y, self.groups, self.sensitive, self.row_ids):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.schema.features

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def continuous_mask(self) -> np.ndarray:
        return np.array([self.schema.kind(f) == CONTINUOUS for f in self.feature_names])

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return replace(
            self,
            X=self.X[idx].copy(),
            y=self.y[idx].copy(),
            groups=None if self.groups is None else self.groups[idx].copy(),
            sensitive=None if self.sensitive is None else self.sensitive[idx].copy(),
            row_ids=self.row_ids[idx].copy(),
            dropped=0,
        )

    def group_index(self, name) -> int:
        try:
            return self.group_names.index(name)
        except ValueError:
            raise KeyError(f"unknown group {name!r}") from None

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.X, self.y, self.groups, self.sensitive):
            if arr is not None:
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class TrainTestSplit:
    train: Dataset
    test: Dataset
    seed: int
    test_fraction: float


def _encode(values: list[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    levels = tuple(sorted(set(values)))
    lookup = {v: i for i, v in enumerate(levels)}
    return np.array([lookup[v] for v in values], dtype=np.int64), levels


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read ``path`` and build a Dataset; rows with missing or unparseable cells are dropped."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path}: file is empty") from None
        missing = [c for c in schema.columns if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        pos = {c: header.index(c) for c in schema.columns}
        numeric_cols = [f for f in schema.features if schema.kind(f) == CONTINUOUS] + [schema.target]
        rows: list[dict] = []
        dropped = 0
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) < len(header):
                raise ParseError(f"{path}: row {lineno} has {len(raw)} fields, expected {len(header)}", lineno)
            cells = {c: raw[pos[c]].strip() for c in schema.columns}
            if any(v == "" or v.upper() in ("NA", "NAN") for v in cells.values()):
                dropped += 1
                continue
            try:
                for c in numeric_cols:
                    val = float(cells[c])
                    if not math.isfinite(val):
                        raise ValueError(c)
                    cells[c] = val
            except ValueError:
                dropped += 1
                continue
            rows.append(cells)
    if not rows:
        raise EmptyDataset(f"{path}: no usable rows ({dropped} dropped)")

    cols, maps = [], {}
    for f in schema.features:
        vals = [r[f] for r in rows]
        if schema.kind(f) == CATEGORICAL:
            codes, levels = _encode(vals)
            maps[f] = levels
            cols.append(codes.astype(float))
        else:
            cols.append(np.array(vals, dtype=float))
    X = np.column_stack(cols) if cols else np.empty((len(rows), 0))
    y = schema.target_rule.apply(np.array([r[schema.target] for r in rows], dtype=float))

    groups, group_names = None, ()
    if schema.group is not None:
        gvals = [str(r[schema.group]) for r in rows]
        groups, group_names = _encode(gvals)
    sensitive = None
    if schema.sensitive is not None:
        sensitive = np.array([str(r[schema.sensitive]) == str(schema.privileged_value) for r in rows],
                             dtype=np.int64)
    return Dataset(schema, X, y, groups, group_names, sensitive, maps, dropped=dropped)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(d: Dataset, test_fraction: float, seed: int) -> TrainTestSplit:
    """Seeded split of ``round(n * test_fraction)`` test rows, stratified by group."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    if d.n == 0:
        raise EmptyDataset("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    n_test = _round_half_up(d.n * test_fraction)
    n_test = min(max(n_test, 1), d.n - 1)

    if d.groups is None:
        test_idx = rng.permutation(d.n)[:n_test]
    else:
        labels = np.unique(d.groups)
        members = [np.flatnonzero(d.groups == g) for g in labels]
        for g, m in zip(labels, members):
            if m.size < 2:
                raise GroupTooSmall(f"group {d.group_names[g]!r} has {m.size} row(s)")
        quota = _allocate(np.array([m.size for m in members]), n_test)
        test_idx = np.concatenate([rng.permutation(m)[:q] for m, q in zip(members, quota)])
    mask = np.zeros(d.n, dtype=bool)
    mask[test_idx] = True
    return TrainTestSplit(d.take(np.flatnonzero(~mask)), d.take(np.flatnonzero(mask)),
                          seed, test_fraction)


def _allocate(sizes: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder allocation of ``total`` test rows, leaving >= 1 train row per group."""
    exact = sizes * total / sizes.sum()
    quota = np.floor(exact).astype(int)
    order = np.argsort(-(exact - quota), kind="stable")
    for i in order[: total - quota.sum()]:
        quota[i] += 1
    cap = sizes - 1
    over = quota > cap
    spill = int((quota[over] - cap[over]).sum())
    quota[over] = cap[over]
    for i in order:
        if spill == 0:
            break
        room = cap[i] - quota[i]
        take = min(room, spill)
        quota[i] += take
        spill -= take
    return quota


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray
    std: np.ndarray
    min: np.ndarray
    max: np.ndarray
    mad: np.ndarray


def feature_stats(d) -> FeatureStats:
    """Per-feature summary; MAD is the mean absolute deviation from the median."""
    X = d.X if isinstance(d, Dataset) else np.asarray(d, dtype=float)
    if X.shape[0] == 0:
        raise EmptyDataset("feature_stats needs at least one row")
    med = np.median(X, axis=0)
    return FeatureStats(
        mean=X.mean(axis=0),
        std=X.std(axis=0),
        min=X.min(axis=0),
        max=X.max(axis=0),
        mad=np.abs(X - med).mean(axis=0),
    )


def from_arrays(X, y, feature_names: Sequence[str], groups=None, group_names=None,
                sensitive=None, kinds=None, target="y") -> Dataset:
    """Build a Dataset straight from arrays (tests, notebooks, synthetic data)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.int64)
    schema = FeatureSchema(tuple(feature_names), target, TargetRule(0.5), kinds or {},
                           group="group" if groups is not None else None,
                           sensitive="sensitive" if sensitive is not None else None,
                           privileged_value="1" if sensitive is not None else None)
    if groups is not None:
        groups = np.asarray(groups, dtype=np.int64)
        if group_names is None:
            group_names = tuple(str(g) for g in range(int(groups.max()) + 1))
    return Dataset(schema, X.copy(), y.copy(),
                   groups=None if groups is None else groups.copy(),
                   group_names=tuple(group_names or ()),
                   sensitive=None if sensitive is None else np.asarray(sensitive, dtype=np.int64).copy())


def group_labels(d: Dataset):
    """Group names per row, or None when the dataset has no group column."""
    if d.groups is None:
        return None
    return np.asarray(d.group_names, dtype=object)[d.groups]
