import numpy as np
import pytest
from hypothesis import given, strategies as st

from uavsim.stats import (CdfSummary, fraction_above, ks_distance, merge_all, percentile,
                          stochastic_dominance)

samples = st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200)
probs = st.floats(0.001, 0.999)


def test_percentile_hand_value():
    # Hazen rank n p + 0.5 = 5.5 on {1..100}
    assert percentile(np.arange(1, 101), 0.05) == 5.5


def test_symmetric_median_and_single_sample():
    assert percentile([1.0, 2.0, 3.0, 4.0], 0.5) == 2.5
    for p in (0.01, 0.5, 0.99):
        assert percentile([7.0], p) == 7.0


def test_percentile_errors():
    with pytest.raises(ValueError):
        percentile([], 0.5)
    with pytest.raises(ValueError):
        percentile([1.0], 0.0)


@given(samples, probs)
def test_percentile_matches_sort_oracle(xs, p):
    x = np.sort(np.asarray(xs))
    n = len(x)
    h = n * p + 0.5
    if h <= 1:
        want = x[0]
    elif h >= n:
        want = x[-1]
    else:
        lo = int(np.floor(h))
        want = x[lo - 1] + (h - lo) * (x[lo] - x[lo - 1])
    got = percentile(xs, p)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-9)
    assert got == pytest.approx(np.percentile(x, 100 * p, method="hazen"), rel=1e-9, abs=1e-6)


def test_fraction_above():
    assert fraction_above([1, 2, 3, 4], 0) == 1.0
    assert fraction_above([1, 2, 3, 4], 9) == 0.0
    assert fraction_above([1, 2, 3, 4], 2) == 0.5


def test_dominance_examples():
    a = np.linspace(0, 1, 50)
    assert stochastic_dominance(a, a, 0.0)
    assert stochastic_dominance(a + 0.3, a)
    # crossing pair: same mean, different spread
    narrow, wide = np.linspace(0.4, 0.6, 50), np.linspace(0.0, 1.0, 50)
    assert not stochastic_dominance(narrow, wide, 0.05)
    assert not stochastic_dominance(wide, narrow, 0.05)


@given(samples, samples)
def test_merge_equals_concatenation(a, b):
    m = CdfSummary(a).merge(CdfSummary(b))
    np.testing.assert_array_equal(m.samples, CdfSummary(a + b).samples)
    np.testing.assert_array_equal(merge_all([CdfSummary(a), CdfSummary(b)]).samples, m.samples)


@given(samples)
def test_cdf_bounds_and_ks_self(xs):
    s = CdfSummary(xs)
    assert s.cdf(s.samples[-1]) == 1.0
    assert ks_distance(s, s) == 0.0


def test_finite_and_nan_handling():
    s = CdfSummary([1.0, np.nan, -np.inf, 3.0])
    assert s.count == 3 and s.finite().count == 2
