import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from breachodds.errors import DomainError, ParseError, StructuralError
from breachodds.ingest import (
    align,
    classify_enso,
    parse_ensemble_csv,
    parse_oni,
    rebaseline,
    serialize_ensemble_csv,
    serialize_series_csv,
)
from breachodds.series import (
    GISTEMP_BASELINE,
    HADCRUT5_BASELINE,
    BaselineSpec,
    EnsembleDataset,
    MonthDate,
    MonthlySeries,
    preindustrial_baseline,
)

M = MonthDate


# ---- MonthDate / MonthlySeries

def test_monthdate_order_and_arithmetic():
    assert M(1999, 12) < M(2000, 1)
    assert M(2000, 1).shift(-1) == M(1999, 12)
    assert M(2024, 3) - M(2023, 3) == 12
    assert str(M.parse("1850-01")) == "1850-01"
    with pytest.raises(DomainError):
        M(2000, 13)
    with pytest.raises(DomainError):
        M.parse("2000-1-1")


@given(st.integers(-2000, 5000), st.integers(-3000, 3000))
def test_shift_roundtrip(ordinal, k):
    d = M.from_ordinal(ordinal)
    assert d.shift(k).shift(-k) == d
    assert d.shift(k) - d == k


def test_series_rejects_nonfinite_and_empty():
    with pytest.raises(StructuralError, match="1850-02"):
        MonthlySeries(M(1850, 1), [0.0, np.nan])
    with pytest.raises(StructuralError):
        MonthlySeries(M(1850, 1), [])


def test_series_is_read_only():
    s = MonthlySeries(M(2000, 1), [1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 3.0


def test_ensemble_requires_equal_spans():
    a = MonthlySeries(M(2000, 1), [1.0, 2.0])
    b = MonthlySeries(M(2000, 2), [1.0, 2.0])
    with pytest.raises(StructuralError):
        EnsembleDataset((a, b))


# ---- parsing

HADCRUT_SMALL = """Time,Realization 1,Realization 2
1850-01,-0.1,-0.2
1850-02,0.05,0.0
1850-03,0.3,0.25
"""


def test_parse_small_ensemble():
    ds = parse_ensemble_csv(HADCRUT_SMALL)
    assert len(ds) == 2 and len(ds[0]) == 3
    assert ds.start == M(1850, 1)
    assert ds[1].values.tolist() == [-0.2, 0.0, 0.25]
    assert ds[0].baseline == HADCRUT5_BASELINE


def test_gap_is_structural_error():
    text = "Time,a\n1999-04,0.1\n1999-05,0.2\n1999-07,0.3\n"
    with pytest.raises(StructuralError, match="gap at 1999-06"):
        parse_ensemble_csv(text)


def test_non_numeric_value_reports_line():
    text = "Time,a\n1999-04,0.1\n1999-05,abc\n"
    with pytest.raises(ParseError) as exc:
        parse_ensemble_csv(text, source="f.csv")
    assert exc.value.line == 3
    assert "f.csv:3" in str(exc.value)


def test_comments_and_blank_lines_tolerated():
    text = "# produced by x\n\n" + HADCRUT_SMALL + "\n\n"
    assert len(parse_ensemble_csv(text)[0]) == 3


def test_gistemp_wide_layout():
    text = (
        "Land-Ocean: Global Means\n"
        "Year,Jan,Feb,Mar,Apr,May,Jun,Jul,Aug,Sep,Oct,Nov,Dec,J-D,D-N,DJF,MAM,JJA,SON\n"
        "1880,-.18,-.24,-.09,-.16,-.10,-.21,-.18,-.10,-.14,-.23,-.22,-.18,-.17,***,***,-.12,-.17,-.20\n"
        "1881,-.20,-.14,.03,.05,.06,-.19,.00,-.04,-.16,-.22,-.19,-.07,-.09,-.10,-.17,.05,-.08,-.19\n"
        "1882,.16,.14,.04,-.16,-.14,-.22,-.16,***,***,***,***,***,***,***,***,***,***,***\n"
    )
    ds = parse_ensemble_csv(text, "gistemp")
    assert len(ds) == 1
    assert ds.start == M(1880, 1) and ds.end == M(1882, 7)
    assert ds[0].baseline == GISTEMP_BASELINE
    assert ds[0].values[0] == -0.18


def test_gistemp_missing_in_middle_is_gap():
    text = (
        "Year,Jan,Feb,Mar,Apr,May,Jun,Jul,Aug,Sep,Oct,Nov,Dec\n"
        "1880,.1,.1,.1,***,.1,.1,.1,.1,.1,.1,.1,.1\n"
    )
    with pytest.raises(StructuralError, match="1880-04"):
        parse_ensemble_csv(text, "gistemp")


def test_unknown_format():
    with pytest.raises(DomainError):
        parse_ensemble_csv(HADCRUT_SMALL, "bogus")


@settings(max_examples=40)
@given(st.integers(1, 4), st.integers(1, 30), st.data())
def test_ensemble_csv_roundtrip(n_real, n_months, data):
    vals = data.draw(st.lists(
        st.lists(st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 3)), min_size=n_months,
                 max_size=n_months), min_size=n_real, max_size=n_real))
    ds = EnsembleDataset(tuple(MonthlySeries(M(1990, 5), v, HADCRUT5_BASELINE, f"r{i}")
                               for i, v in enumerate(vals)))
    back = parse_ensemble_csv(serialize_ensemble_csv(ds))
    assert back.start == ds.start
    assert np.array_equal(back.matrix(), ds.matrix())
    assert [r.label for r in back] == [r.label for r in ds]
    again = serialize_ensemble_csv(back)
    assert again == serialize_ensemble_csv(ds)


def test_oni_twelve_rows():
    text = "\n".join(f"2000 {m} {0.1 * m:.1f}" for m in range(1, 13))
    s = parse_oni(text)
    assert len(s) == 12 and s.start == M(2000, 1)


def test_oni_season_codes():
    text = "SEAS  YR   TOTAL   ANOM\nDJF 1950 24.72 -1.53\nJFM 1950 25.17 -1.34\nFMA 1950 25.75 -1.16\n"
    s = parse_oni(text)
    assert s.start == M(1950, 1)
    assert s.values.tolist() == [-1.53, -1.34, -1.16]


def test_oni_csv_roundtrip():
    s = MonthlySeries(M(1950, 1), [0.7, -0.6, 0.0], label="ONI")
    back = parse_oni(serialize_series_csv(s))
    assert np.array_equal(back.values, s.values) and back.start == s.start


def test_oni_gap():
    with pytest.raises(StructuralError, match="gap at 2000-03"):
        parse_oni("2000 1 0.1\n2000 2 0.2\n2000 4 0.3\n")


def test_enso_classification():
    assert classify_enso(0.7) == "el_nino"
    assert classify_enso(0.5) == "el_nino"
    assert classify_enso(-0.6) == "la_nina"
    assert classify_enso(0.2) == "neutral"


# ---- rebaseline

def _series(values, start=M(1850, 1)):
    return MonthlySeries(start, values)


def test_rebaseline_constant_gives_zeros():
    s = _series(np.full(600, 5.0))
    out = rebaseline(s, BaselineSpec(M(1850, 1), M(1869, 12)))
    assert np.all(out.values == 0.0)


def test_rebaseline_window_mean_oracle():
    rng = np.random.default_rng(3)
    v = rng.normal(0.3, 0.2, 900)
    s = _series(v)
    target = preindustrial_baseline(s.start)
    out = rebaseline(s, target)
    n = target.end - s.start + 1
    window_mean = sum(v[:n]) / n           # independent summation
    assert np.allclose(out.values, v - window_mean, atol=1e-12)
    assert abs(out.values[:n].mean()) < 1e-10
    assert out.baseline == target


def test_rebaseline_idempotent_and_preserves_differences():
    rng = np.random.default_rng(4)
    s = _series(rng.normal(size=700))
    t = BaselineSpec(M(1860, 1), M(1890, 12))
    once = rebaseline(s, t)
    twice = rebaseline(once, t)
    assert np.max(np.abs(once.values - twice.values)) < 1e-10
    assert np.allclose(np.diff(once.values), np.diff(s.values), atol=1e-12)


def test_rebaseline_window_errors():
    s = _series(np.zeros(600))
    with pytest.raises(DomainError):
        rebaseline(s, BaselineSpec(M(1700, 1), M(1800, 12)))
    with pytest.raises(DomainError, match="120"):
        rebaseline(s, BaselineSpec(M(1850, 1), M(1855, 12)))


# ---- align

def test_align_neutral_zero_fills_pre_oni_months():
    temp = _series(np.arange((2024 - 1850 + 1) * 12, dtype=float))
    oni = MonthlySeries(M(1950, 1), np.ones((2024 - 1950 + 1) * 12))
    p = align(temp, oni, "neutral-zero")
    assert p.start == M(1850, 1) and p.end == M(2024, 12)
    assert p.filled.sum() == 1200
    assert np.all(p.x_oni[:1200] == 0) and np.all(p.x_oni[1200:] == 1)
    assert np.array_equal(p.y, temp.values)


def test_align_identical_spans_and_truncate():
    temp = _series(np.zeros(24), M(2000, 1))
    oni = MonthlySeries(M(2000, 1), np.ones(24))
    assert not align(temp, oni).filled.any()
    long = _series(np.zeros((2024 - 1850 + 1) * 12))
    oni2 = MonthlySeries(M(1950, 1), np.ones((2024 - 1950 + 1) * 12))
    p = align(long, oni2, "truncate-to-overlap")
    assert p.start == M(1950, 1) and p.end == M(2024, 12)


def test_align_truncate_empty_overlap():
    with pytest.raises(DomainError):
        align(_series(np.zeros(12), M(1900, 1)), MonthlySeries(M(2000, 1), np.ones(12)), "truncate-to-overlap")


@settings(max_examples=30)
@given(st.integers(-40, 40), st.integers(1, 60))
def test_align_never_alters_observed(offset, n_oni):
    temp = _series(np.arange(60.0), M(2000, 1))
    oni = MonthlySeries(M(2000, 1).shift(offset), np.full(n_oni, 2.0))
    p = align(temp, oni)
    assert np.array_equal(p.y, temp.values)
    assert np.all(p.x_oni[p.filled] == 0.0)
    assert np.all(p.x_oni[~p.filled] == 2.0)
