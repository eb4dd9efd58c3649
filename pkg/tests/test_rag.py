import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clfaudit import rag
from clfaudit.errors import UnknownKpi

EPS = 1e-12

# (kpi, endpoint, color just below, color at, color just above); None = outside range
ENDPOINTS = [
    ("1.1.2a", 0.0, None, "Green", "Green"), ("1.1.2a", 1.0, "Green", "Amber", "Amber"),
    ("1.1.2a", 5.0, "Amber", "Amber", "Red"),
    ("1.1.2b", 0.0, None, "Red", "Red"), ("1.1.2b", 0.05, "Red", "Red", "Amber"),
    ("1.1.2b", 0.1, "Amber", "Amber", "Green"), ("1.1.2b", 1.0, "Green", "Green", None),
    ("1.1.2c", 0.05, "Red", "Red", "Amber"), ("1.1.2c", 0.1, "Amber", "Amber", "Green"),
    ("1.2.1", 0.0, None, "Red", "Red"), ("1.2.1", 0.5, "Red", "Amber", "Amber"),
    ("1.2.1", 0.8, "Amber", "Green", "Green"), ("1.2.1", 1.0, "Green", "Green", None),
    ("1.2.2", 0.5, "Red", "Amber", "Amber"), ("1.2.2", 0.8, "Amber", "Green", "Green"),
    ("1.3.1", 0.0, None, "Green", "Green"), ("1.3.1", 0.1, "Green", "Amber", "Amber"),
    ("1.3.1", 0.3, "Amber", "Red", "Red"),
    ("1.3.2", 0.0, None, "Green", "Green"), ("1.3.2", 5.0, "Green", "Green", "Amber"),
    ("1.3.2", 6.0, "Amber", "Amber", "Amber"), ("1.3.2", 10.0, "Amber", "Amber", "Red"),
    ("2.1.1", 0.0, None, "Green", "Green"), ("2.1.1", 0.1, "Green", "Amber", "Amber"),
    ("2.1.1", 0.2, "Amber", "Amber", "Red"), ("2.1.1", 1.0, "Red", "Red", None),
    ("2.1.2a", 0.0, None, "Red", "Red"), ("2.1.2a", 0.75, "Red", "Amber", "Amber"),
    ("2.1.2a", 0.8, "Amber", "Amber", "Green"), ("2.1.2a", 1.0, "Green", "Green", None),
    ("2.1.2b", 0.0, None, "Green", "Green"), ("2.1.2b", 0.2, "Green", "Amber", "Amber"),
    ("2.1.2b", 0.25, "Amber", "Amber", "Red"), ("2.1.2b", 1.0, "Red", "Red", None),
    ("2.2.1", 0.2, "Green", "Amber", "Amber"), ("2.2.1", 0.25, "Amber", "Amber", "Red"),
    ("2.2.2", 0.2, "Green", "Amber", "Amber"), ("2.2.2", 0.25, "Amber", "Amber", "Red"),
    ("3.1.1", -1.0, None, "Red", "Red"), ("3.1.1", 0.3, "Red", "Amber", "Amber"),
    ("3.1.1", 0.8, "Amber", "Green", "Green"), ("3.1.1", 1.0, "Green", "Green", None),
    ("3.1.2", 0.0, None, "Green", "Green"), ("3.1.2", 0.1, "Green", "Amber", "Amber"),
    ("3.1.2", 0.2, "Amber", "Amber", "Red"),
    ("3.1.3", 0.0, None, "Green", "Green"), ("3.1.3", 10.0, "Green", "Green", "Amber"),
    ("3.1.3", 20.0, "Amber", "Amber", "Red"), ("3.1.3", 100.0, "Red", "Red", None),
    ("3.2.1", 0.0, None, "Red", "Red"), ("3.2.1", 75.0, "Red", "Amber", "Amber"),
    ("3.2.1", 90.0, "Amber", "Green", "Green"), ("3.2.1", 100.0, "Green", "Green", None),
    ("3.2.2", 0.7, "Red", "Amber", "Amber"), ("3.2.2", 0.9, "Amber", "Green", "Green"),
    ("3.2.3", 0.7, "Red", "Amber", "Amber"), ("3.2.3", 0.9, "Amber", "Green", "Green"),
    ("3.2.4", 0.7, "Red", "Amber", "Amber"), ("3.2.4", 0.9, "Amber", "Green", "Green"),
]


def _neighbors(x):
    # an absolute 1e-12 step, but never smaller than one ulp
    return x - max(EPS, math.ulp(x)), x + max(EPS, math.ulp(x))


@pytest.mark.parametrize("kpi_id, x, below, at, above", ENDPOINTS)
def test_endpoint_and_neighbors(kpi_id, x, below, at, above):
    lo, hi = _neighbors(x)
    assert rag.rag_score(kpi_id, x) == at
    # outside the range but within the clamp slack: same color as the endpoint
    assert rag.rag_score(kpi_id, lo) == (below or at)
    assert rag.rag_score(kpi_id, hi) == (above or at)


@pytest.mark.parametrize("kpi_id, value, color", [
    ("1.2.1", 0.95, "Green"), ("2.1.2a", 0.98, "Green"), ("3.2.1", 50.28, "Red"),
    ("3.2.1", 33.26, "Red"), ("3.2.2", 0.48, "Red"), ("3.2.3", 0.04, "Red"), ("3.2.4", 0.52, "Red"),
    ("2.1.1", 0.14, "Amber"), ("2.1.2b", 0.01, "Green"), ("2.2.1", 0.15, "Green"),
    ("2.2.2", 0.26, "Red"), ("1.3.1", 0.0094, "Green"), ("1.1.2a", 7.8, "Red"),
    ("1.1.2a", 1.8, "Amber"), ("1.2.2", 0.83, "Green"), ("2.1.2a", 0.89, "Green"),
    ("3.1.1", 0.86, "Green"),
])
def test_case_study_values(kpi_id, value, color):
    assert rag.rag_score(kpi_id, value) == color


def test_out_of_range_and_bad_values():
    with pytest.raises(ValueError):
        rag.rag_score("1.2.1", 1.1)
    with pytest.raises(ValueError):
        rag.rag_score("1.2.1", float("nan"))
    with pytest.raises(UnknownKpi):
        rag.rag_score("9.9.9", 0.5)
    assert rag.rag_score("1.1.2a", math.inf) == "Red"


@pytest.mark.parametrize("kpi_id", sorted(rag.KPI_TABLE))
def test_bands_partition_the_range(kpi_id):
    bands = rag.spec_for(kpi_id).bands
    for (_, a), (_, b) in zip(bands, bands[1:]):
        assert a.hi == b.lo and a.hi_closed != b.lo_closed


@pytest.mark.parametrize("kpi_id", sorted(rag.KPI_TABLE))
def test_monotone_in_value(kpi_id):
    spec = rag.spec_for(kpi_id)
    lo = spec.range.lo
    hi = spec.range.hi if math.isfinite(spec.range.hi) else 50.0
    xs = [lo + (hi - lo) * i / 400 for i in range(401)]
    ranks = [rag.COLOR_RANK[rag.rag_score(kpi_id, x)] for x in xs]
    if spec.direction == rag.LOWER_BETTER:
        ranks = ranks[::-1]
    assert ranks == sorted(ranks)


@given(st.floats(0.0, 1.0))
def test_auc_color_is_total(x):
    assert rag.rag_score("1.2.1", x) in (rag.RED, rag.AMBER, rag.GREEN)


def test_worst():
    assert rag.worst(["Green", "Red", "Amber"]) == "Red"
    assert rag.worst(["Green", "Amber"]) == "Amber"
