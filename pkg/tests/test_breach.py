import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from breachodds.breach import (
    breach_distribution,
    centered_ma_240,
    first_breach,
    threshold_label,
)
from breachodds.errors import DomainError
from breachodds.series import MonthDate, MonthlySeries

S = MonthDate(2004, 1)


def series(values, start=S):
    return MonthlySeries(start, np.asarray(values, dtype=float))


def naive_ma(x, t):
    total = 0.0
    for j in range(t - 120, t + 120):
        total += x[j]
    return total / 240


def test_first_centre_month():
    ma = centered_ma_240(series(np.zeros(300)))
    assert ma.start == MonthDate(2014, 1)
    assert len(ma) == 300 - 240 + 1


def test_constant_and_ramp():
    assert np.allclose(centered_ma_240(series(np.full(500, 1.6))).values, 1.6, atol=1e-14)
    x = 0.01 * np.arange(600)
    ma = centered_ma_240(series(x))
    rng = np.random.default_rng(0)
    for t in rng.integers(120, 600 - 119, size=5):
        assert abs(ma.values[t - 120] - naive_ma(x, t)) < 1e-10
        assert abs(ma.values[t - 120] - (x[t] - 0.005)) < 1e-10   # ramp shifted by half a step


def test_step_crosses_half_near_step():
    M = 300
    x = (np.arange(600) >= M).astype(float)
    ma = centered_ma_240(series(x))
    cross = int(np.argmax(ma.values >= 0.5)) + 120
    assert abs(cross - M) <= 1


def test_too_short():
    with pytest.raises(DomainError):
        centered_ma_240(series(np.zeros(239)))


def test_first_breach_boundaries():
    assert first_breach(series(np.full(10, 1.49)), 1.5) is None
    v = np.full(10, 1.0)
    v[4] = 1.5
    assert first_breach(series(v), 1.5) == S.shift(4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_ma_is_linear(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=300), rng.normal(size=300)
    lhs = centered_ma_240(series(a + b)).values
    rhs = centered_ma_240(series(a)).values + centered_ma_240(series(b)).values
    assert np.allclose(lhs, rhs, atol=1e-12)


def _paths_breaching_at(months, n=260):
    """Paths whose centred mean first reaches 1.5 at the given MA index (None: never)."""
    out = []
    for m in months:
        x = np.zeros(n)
        if m is not None:
            x[120 + m + 119] = 1.5 * 240     # enters the window centred at MA index m
        out.append(series(x))
    return out


def test_four_paths_counting():
    dist = breach_distribution(_paths_breaching_at([1, 2, 3, None]), [1.5])
    p = dist.prob[0]
    assert p[0] == 0 and p[1] == 0.25 and p[2] == 0.5 and p[3] == 0.75 and p[-1] == 0.75


def test_identical_paths_jump():
    dist = breach_distribution(_paths_breaching_at([5, 5, 5]), [1.5])
    assert np.all(dist.prob[0][:5] == 0) and np.all(dist.prob[0][5:] == 1)


def test_never_breaching_path_rescales():
    base = _paths_breaching_at([0, 3, 7, 9, None])
    d1 = breach_distribution(base, [1.5])
    d2 = breach_distribution(base + _paths_breaching_at([None]), [1.5])
    assert np.allclose(d2.prob, d1.prob * 5 / 6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 12))
def test_distribution_invariants(seed, n):
    rng = np.random.default_rng(seed)
    paths = [series(np.cumsum(rng.normal(0.01, 0.05, 400)) + rng.normal(0, 0.5)) for _ in range(n)]
    d = breach_distribution(paths, (1.5, 2.0))
    assert np.all(np.diff(d.prob, axis=1) >= 0)
    assert np.all(d.prob[1] <= d.prob[0])
    assert np.allclose(d.prob * n, np.round(d.prob * n))
    perm = [paths[i] for i in rng.permutation(n)]
    assert np.array_equal(breach_distribution(perm, (1.5, 2.0)).counts, d.counts)


def test_empty_and_mismatched():
    with pytest.raises(DomainError):
        breach_distribution([])
    with pytest.raises(DomainError):
        breach_distribution([series(np.zeros(300)), series(np.zeros(301))])


def test_csv_schema_and_headline():
    paths = _paths_breaching_at([2, 4, None, None])
    d = breach_distribution(paths, (1.5, 2.0))
    lines = d.to_csv(["config_sha256=abc master_seed=1"]).splitlines()
    assert lines[0].startswith("# config_sha256=")
    assert lines[1] == "year,month,prob_1p5,prob_2p0,n_paths"
    assert lines[2] == "2014,1,0.0,0.0,4"
    one = breach_distribution(paths, [1.5]).to_csv().splitlines()
    assert one[0] == "year,month,prob_1p5,n_paths"
    h = d.headline()
    assert h[1.5]["first_nonzero"] == MonthDate(2014, 3)
    assert h[1.5]["p50"] == MonthDate(2014, 5)
    assert h[1.5]["p99"] is None
    text = d.headline_lines()
    assert "P(1.5°C)>=0.5 by 2014-05" in text
    assert any(t.startswith("P(1.5°C)>=0.99 not reached by") for t in text)


def test_threshold_labels():
    assert threshold_label(1.5) == "1p5" and threshold_label(2.0) == "2p0"
