import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from clfaudit.errors import (DegenerateSample, LengthMismatch, RankDeficient,
                             SampleSizeOutOfRange, ZeroVector)
from clfaudit.numerics import (chi_square_sf, cosine_similarity, shapiro_wilk, solve_ols,
                               spearman_rho, weighted_least_squares)


def test_ols_exact_line():
    fit = solve_ols([[1, 0], [1, 1], [1, 2]], [0, 1, 2])
    np.testing.assert_allclose(fit.coefficients, [0, 1], atol=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_ols_constant_target():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    fit = solve_ols(X, np.full(5, 3.0))
    assert abs(fit.coefficients[1]) < 1e-12
    assert fit.r_squared == 0.0


def test_ols_matches_normal_equations(rng):
    X = np.column_stack([np.ones(20), rng.normal(size=(20, 2))])
    y = rng.normal(size=20)
    ref = np.linalg.inv(X.T @ X) @ X.T @ y
    np.testing.assert_allclose(solve_ols(X, y).coefficients, ref, atol=1e-9)


def test_ols_collinear_raises():
    x = np.arange(10.0)
    with pytest.raises(RankDeficient):
        solve_ols(np.column_stack([np.ones(10), x, 2 * x]), x)


def test_ols_length_mismatch():
    with pytest.raises(LengthMismatch):
        solve_ols(np.ones((4, 1)), np.ones(3))


def test_wls_unit_weights_equal_ols(rng):
    X = np.column_stack([np.ones(30), rng.normal(size=(30, 2))])
    y = rng.normal(size=30)
    np.testing.assert_allclose(weighted_least_squares(X, y, np.ones(30)),
                               solve_ols(X, y).coefficients, atol=1e-12)


def test_wls_zero_weight_drops_row(rng):
    X = np.column_stack([np.ones(15), rng.normal(size=15)])
    y = rng.normal(size=15)
    y[4] = 1e6
    w = np.ones(15)
    w[4] = 0.0
    keep = np.arange(15) != 4
    np.testing.assert_allclose(weighted_least_squares(X, y, w),
                               solve_ols(X[keep], y[keep]).coefficients, atol=1e-9)


def test_wls_matches_rescaled_oracle(rng):
    X = rng.normal(size=(25, 3))
    y = rng.normal(size=25)
    w = rng.uniform(0.1, 3.0, size=25)
    sw = np.sqrt(w)
    Xs, ys = X * sw[:, None], y * sw
    ref = np.linalg.solve(Xs.T @ Xs, Xs.T @ ys)
    np.testing.assert_allclose(weighted_least_squares(X, y, w), ref, atol=1e-9)


def test_wls_rejects_negative_weight():
    with pytest.raises(ValueError):
        weighted_least_squares(np.ones((3, 1)), np.ones(3), [1, -1, 1])


@pytest.mark.parametrize("a, b, expect", [([1, 2, 3], [10, 20, 30], 1.0), ([1, 2, 3], [3, 2, 1], -1.0)])
def test_spearman_examples(a, b, expect):
    assert spearman_rho(a, b) == pytest.approx(expect)


def _ranks_by_definition(v):
    """Average rank: 1 + (number strictly smaller) + (ties - 1) / 2."""
    v = list(v)
    return [1 + sum(u < x for u in v) + (sum(u == x for u in v) - 1) / 2 for x in v]


def spearman_oracle(a, b):
    ra, rb = _ranks_by_definition(a), _ranks_by_definition(b)
    ma, mb = sum(ra) / len(ra), sum(rb) / len(rb)
    num = sum((x - ma) * (y - mb) for x, y in zip(ra, rb))
    den = math.sqrt(sum((x - ma) ** 2 for x in ra) * sum((y - mb) ** 2 for y in rb))
    return 0.0 if den == 0 else num / den


def test_spearman_with_ties_against_oracle(rng):
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 40))
        a = rng.integers(0, 5, size=n).astype(float)
        b = rng.integers(0, 5, size=n).astype(float)
        worst = max(worst, abs(spearman_rho(a, b) - spearman_oracle(a, b)))
    assert worst < 1e-12


def test_spearman_constant_is_zero():
    assert spearman_rho([1, 1, 1], [1, 2, 3]) == 0.0


@given(st.lists(st.integers(-5, 5), min_size=2, max_size=30), st.data())
@settings(max_examples=60, deadline=None)
def test_spearman_bounded_and_symmetric(a, data):
    b = data.draw(st.lists(st.integers(-5, 5), min_size=len(a), max_size=len(a)))
    r = spearman_rho(a, b)
    assert -1.0 <= r <= 1.0
    assert r == pytest.approx(spearman_rho(b, a), abs=1e-12)


def test_cosine_examples():
    assert cosine_similarity([2, 3], [2, 3]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(ZeroVector):
        cosine_similarity([0, 0], [1, 1])


def test_chi_square_sf():
    assert chi_square_sf(0.0, 2) == 1.0
    assert chi_square_sf(1.0, 1) == pytest.approx(2 * (1 - stats.norm.cdf(1.0)), abs=1e-12)
    assert chi_square_sf(100.0, 3) < 1e-15
    for x, df in ((0.5, 1), (3.2, 4), (12.0, 7)):
        assert chi_square_sf(x, df) == pytest.approx(stats.chi2.sf(x, df), rel=1e-12)


# Reference vectors with published W and p (the last one is the worked
# example of the AS R94 note).
SW_VECTORS = [
    ([0.11, 7.87, 4.61, 10.14, 7.95, 3.14, 0.46, 4.43, 0.21, 4.75, 0.71, 1.52, 3.24,
      0.93, 0.42, 4.97, 9.53, 4.55, 0.47, 6.66], 0.90047299861907959, 0.042089745402336121),
    ([1.36, 1.14, 2.92, 2.55, 1.46, 1.06, 5.27, -1.11, 3.48, 1.10, 0.88, -0.51, 1.46,
      0.52, 6.20, 1.69, 0.08, 3.67, 2.81, 3.49], 0.9590270, 0.52460),
    ([0.139, 0.157, 0.175, 0.256, 0.344, 0.413, 0.503, 0.577, 0.614, 0.655, 0.954,
      1.392, 1.557, 1.648, 1.690, 1.994, 2.174, 2.206, 3.245, 3.510, 3.571, 4.354,
      4.980, 6.084, 8.351], 0.83467, 0.000914),
]


@pytest.mark.parametrize("x, w, p", SW_VECTORS)
def test_shapiro_published_vectors(x, w, p):
    got_w, got_p = shapiro_wilk(x)
    assert got_w == pytest.approx(w, abs=1e-3)
    assert got_p == pytest.approx(p, abs=1e-3)


def test_shapiro_matches_scipy(rng):
    for n in (3, 4, 7, 11, 12, 50, 300, 2000):
        x = rng.standard_t(5, size=n)
        w, p = shapiro_wilk(x)
        ref = stats.shapiro(x)
        assert w == pytest.approx(ref.statistic, abs=1e-6)
        assert p == pytest.approx(ref.pvalue, abs=1e-6)


def test_shapiro_two_point_rejects(rng):
    assert shapiro_wilk(rng.integers(0, 2, size=50))[1] < 0.01


def test_shapiro_errors():
    with pytest.raises(SampleSizeOutOfRange):
        shapiro_wilk([1.0, 2.0])
    with pytest.raises(DegenerateSample):
        shapiro_wilk([3.0] * 10)


def test_shapiro_null_calibration():
    r = np.random.default_rng(2024)
    rejections = sum(shapiro_wilk(r.normal(size=50))[1] < 0.05 for _ in range(1000))
    assert 0.03 <= rejections / 1000 <= 0.08
