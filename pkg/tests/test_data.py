import numpy as np
import pytest

from clfaudit.data import (CATEGORICAL, FeatureSchema, TargetRule, feature_stats, from_arrays,
                           load_csv, split)
from clfaudit.errors import EmptyDataset, MissingColumn, ParseError

SCHEMA = FeatureSchema(("age", "bmi"), "charges", TargetRule(6000.0, "greater"))


def _write(tmp_path, text):
    p = tmp_path / "d.csv"
    p.write_text(text)
    return p


def test_threshold_is_strict(tmp_path):
    p = _write(tmp_path, "age,bmi,charges\n20,25,5000\n30,26,7000\n40,27,6000\n")
    d = load_csv(p, SCHEMA)
    assert d.y.tolist() == [0, 1, 0]


def test_blank_cell_dropped(tmp_path):
    p = _write(tmp_path, "age,bmi,charges\n20,,5000\n30,26,7000\n40,27,6000\n")
    d = load_csv(p, SCHEMA)
    assert d.n == 2 and d.dropped == 1


def test_missing_column(tmp_path):
    p = _write(tmp_path, "age,charges\n20,5000\n")
    with pytest.raises(MissingColumn, match="bmi"):
        load_csv(p, SCHEMA)


def test_empty_and_short_rows(tmp_path):
    with pytest.raises(EmptyDataset):
        load_csv(_write(tmp_path, ""), SCHEMA)
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, "age,bmi,charges\n20,25\n"), SCHEMA)


def test_categorical_and_sensitive(tmp_path):
    schema = FeatureSchema(("age", "region"), "charges", TargetRule(6000.0),
                           {"region": CATEGORICAL}, group="region", sensitive="sex",
                           privileged_value="male")
    p = _write(tmp_path, "age,region,sex,charges\n20,south,male,1\n30,north,female,9000\n")
    d = load_csv(p, schema)
    assert d.category_maps["region"] == ("north", "south")
    assert d.X[:, 1].tolist() == [1.0, 0.0]
    assert d.sensitive.tolist() == [1, 0]
    assert d.group_names == ("north", "south")


def test_synthetic_insurance_rows(insurance_split):
    sp = insurance_split
    assert sp.train.n + sp.test.n == 1338
    assert sp.test.n == 67


def test_split_sizes_and_determinism():
    d = from_arrays(np.arange(100.0), np.arange(100) % 2, ["x"])
    a, b = split(d, 0.05, 11), split(d, 0.05, 11)
    assert (a.train.n, a.test.n) == (95, 5)
    assert a.test.row_ids.tolist() == b.test.row_ids.tolist()


def test_split_seed_sensitivity():
    d = from_arrays(np.arange(100.0), np.arange(100) % 2, ["x"])
    members = {tuple(split(d, 0.05, s).test.row_ids.tolist()) for s in range(10)}
    assert len(members) > 1


def test_split_stratified_by_group():
    groups = np.repeat(np.arange(4), 50)
    d = from_arrays(np.arange(200.0), np.arange(200) % 2, ["x"], groups=groups)
    sp = split(d, 0.2, 0)
    assert np.bincount(sp.test.groups).tolist() == [10, 10, 10, 10]
    assert not set(sp.train.row_ids) & set(sp.test.row_ids)


@pytest.mark.parametrize("col, mean, std, mad", [
    ([1, 1, 1], 1.0, 0.0, 0.0),
    ([0, 10], 5.0, None, 5.0),
    ([1, 2, 3, 4], None, None, 1.0),
])
def test_feature_stats(col, mean, std, mad):
    s = feature_stats(np.asarray(col, dtype=float)[:, None])
    if mean is not None:
        assert s.mean[0] == pytest.approx(mean)
    if std is not None:
        assert s.std[0] == pytest.approx(std)
    assert s.mad[0] == pytest.approx(mad)


def test_dataset_is_read_only():
    d = from_arrays([[1.0], [2.0]], [0, 1], ["x"])
    with pytest.raises(ValueError):
        d.X[0, 0] = 5.0
