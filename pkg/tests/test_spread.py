import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spreadlab import (EXCLUDE_ZEROS, INCLUDE_ZEROS,
                       IntradayProfile, MarketSeries, QuoteTick, SpreadSeries,
                       align_series, bin_day_spreads, build_spread_series,
                       clean_ticks, intraday_average, market_average,
                       parse_tick_file, point_spread)
from spreadlab.spread import read_values_csv, write_market_csv, write_series_csv

D1 = dt.date(2005, 1, 4)
D2 = dt.date(2005, 1, 5)


def tick(sec, bid_milli, ask_milli, stock="600100", day=D1):
    ts = dt.datetime.combine(day, dt.time(sec // 3600, sec % 3600 // 60, sec % 60))
    return QuoteTick(stock, ts, bid_milli, ask_milli)


# ---------------------------------------------------------------------------
# point spread
# ---------------------------------------------------------------------------

def test_point_spread_examples():
    assert point_spread(tick(34200, 10520, 10550)) == pytest.approx(0.03)
    assert point_spread(tick(34200, 4990, 5000)) == pytest.approx(0.01)


def test_point_spread_rejects_locked_quote():
    with pytest.raises(ValueError, match="crossed"):
        point_spread(tick(34200, 10000, 10000))


# ---------------------------------------------------------------------------
# daily binning
# ---------------------------------------------------------------------------

def test_bin_day_spreads_mean_of_two():
    ticks = [tick(34205, 10000, 10020), tick(34215, 10000, 10040)]
    out = bin_day_spreads(ticks)
    assert out[0] == pytest.approx(0.03)
    assert np.count_nonzero(out) == 1


def test_bin_day_spreads_empty_bin_is_zero():
    out = bin_day_spreads([tick(34200 + 35, 10000, 10050)])
    assert out[0] == 0.0 and out[1] == pytest.approx(0.05)


def test_bin_day_spreads_constant():
    ticks = [tick(34200 + 30 * b + 3, 10000, 10050) for b in range(240)]
    ticks += [tick(46800 + 30 * b + 3, 10000, 10050) for b in range(240)]
    out = bin_day_spreads(ticks)
    assert np.allclose(out, 0.05)


def test_bin_day_spreads_rejects_dirty_input():
    with pytest.raises(ValueError, match="out-of-session"):
        bin_day_spreads([tick(12 * 3600, 10000, 10050)])
    with pytest.raises(ValueError, match="crossed"):
        bin_day_spreads([tick(34200, 10050, 10050)])


# ---------------------------------------------------------------------------
# series / market average
# ---------------------------------------------------------------------------

def series_of(values_by_day, stock="600100"):
    days = (D1, D2)[:len(values_by_day)]
    return SpreadSeries(stock, days, np.concatenate([
        np.asarray(v, dtype=float) for v in values_by_day]))


def const_series(value, stock):
    return SpreadSeries(stock, (D1,), np.full(480, float(value)))


def test_market_average_excludes_zero_bins():
    a, b, c = const_series(0.02, "A"), const_series(0.0, "B"), const_series(0.04, "C")
    m = market_average([a, b, c])
    assert np.allclose(m.values, 0.03)
    assert np.all(m.n_stocks == 2)


def test_market_average_all_zero_bin():
    m = market_average([const_series(0, "A"), const_series(0, "B")])
    assert np.all(m.values == 0) and np.all(m.n_stocks == 0)


def test_market_average_single_stock_identity():
    s = const_series(0.025, "A")
    m = market_average([s])
    assert np.array_equal(m.values, s.values)


def test_market_average_identical_series_is_common_series():
    rng = np.random.default_rng(3)
    # dyadic values keep the n-fold sum representable, so equality is exact
    vals = rng.integers(1, 50, 480) / 1024.0
    ss = [SpreadSeries(sid, (D1,), vals.copy()) for sid in "ABC"]
    assert np.array_equal(market_average(ss).values, vals)
    arbitrary = rng.uniform(0.01, 0.05, 480)
    ss = [SpreadSeries(sid, (D1,), arbitrary.copy()) for sid in "ABC"]
    np.testing.assert_allclose(market_average(ss).values, arbitrary,
                               rtol=5e-16, atol=0)


def test_market_average_rejects_misaligned_days():
    a = SpreadSeries("A", (D1,), np.ones(480) * 0.02)
    b = SpreadSeries("B", (D2,), np.ones(480) * 0.02)
    with pytest.raises(ValueError, match="misaligned"):
        market_average([a, b])


def test_align_series_zero_fills_missing_days():
    a = SpreadSeries("A", (D1,), np.full(480, 0.02))
    b = SpreadSeries("B", (D2,), np.full(480, 0.04))
    aa, bb = align_series([a, b])
    assert aa.days == bb.days == (D1, D2)
    assert np.all(aa.day_matrix()[1] == 0) and np.all(bb.day_matrix()[0] == 0)
    m = market_average([aa, bb])
    assert np.allclose(m.values[:480], 0.02) and np.allclose(m.values[480:], 0.04)
    assert np.all(m.n_stocks == 1)


# ---------------------------------------------------------------------------
# intraday averaging
# ---------------------------------------------------------------------------

def test_intraday_average_two_days_both_modes():
    s = series_of([np.full(480, 0.02), np.full(480, 0.04)])
    for mode in (INCLUDE_ZEROS, EXCLUDE_ZEROS):
        prof = intraday_average(s, mode)
        assert np.allclose(prof.values, 0.03)
        assert prof.n_days == 2 and len(prof.values) == 480


def test_intraday_average_zero_bin_differs_by_mode():
    day1 = np.zeros(480); day1[10] = 0.02
    day2 = np.zeros(480); day2[10] = 0.0
    s = series_of([day1, day2])
    assert intraday_average(s, INCLUDE_ZEROS).values[10] == pytest.approx(0.01)
    assert intraday_average(s, EXCLUDE_ZEROS).values[10] == pytest.approx(0.02)


def test_intraday_average_single_day_identity():
    vals = np.random.default_rng(0).uniform(0.0, 0.05, 480)
    s = series_of([vals])
    assert np.array_equal(intraday_average(s, INCLUDE_ZEROS).values, vals)


def test_intraday_average_rejects_unknown_mode_and_empty():
    s = series_of([np.full(480, 0.02)])
    with pytest.raises(ValueError):
        intraday_average(s, "other")
    with pytest.raises(ValueError):
        intraday_average(SpreadSeries("A", (), np.empty(0)))


def test_modes_agree_on_dense_data():
    rng = np.random.default_rng(5)
    vals = rng.uniform(0.001, 0.05, 480 * 3)  # strictly positive everywhere
    s = SpreadSeries("A", (D1, D2, dt.date(2005, 1, 6)), vals)
    inc = intraday_average(s, INCLUDE_ZEROS).values
    exc = intraday_average(s, EXCLUDE_ZEROS).values
    assert np.allclose(inc, exc, rtol=0, atol=0)


@given(scale=st.floats(0.5, 50), seed=st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_linearity_under_spread_scaling(scale, seed):
    rng = np.random.default_rng(seed)
    vals = np.where(rng.random(960) < 0.3, 0.0, rng.uniform(0.01, 0.05, 960))
    s = SpreadSeries("A", (D1, D2), vals)
    t = SpreadSeries("A", (D1, D2), vals * scale)
    for mode in (INCLUDE_ZEROS, EXCLUDE_ZEROS):
        a = intraday_average(s, mode).values
        b = intraday_average(t, mode).values
        assert np.allclose(b, a * scale, rtol=1e-12, atol=1e-15)
    ma = market_average([s, s]).values
    mb = market_average([t, t]).values
    assert np.allclose(mb, ma * scale, rtol=1e-12, atol=1e-15)


def test_tick_level_spread_scaling_is_linear():
    # ask -> bid + c * (ask - bid) with integer c scales the whole chain
    base = [tick(34200 + 30 * b + 3, 10000, 10000 + 20 + b % 7)
            for b in range(240)]
    base += [tick(46800 + 30 * b + 3, 10000, 10000 + 20 + b % 7)
             for b in range(240)]
    c = 3
    scaled = [QuoteTick(t.stock_id, t.timestamp, t.bid_milli,
                        t.bid_milli + c * (t.ask_milli - t.bid_milli))
              for t in base]
    a = bin_day_spreads(base)
    b = bin_day_spreads(scaled)
    assert np.allclose(b, c * a, rtol=1e-15, atol=0)


def test_market_average_bounded_by_contributors():
    rng = np.random.default_rng(6)
    stacks = []
    for sid in "ABCDE":
        vals = np.where(rng.random(480) < 0.4, 0.0, rng.uniform(0.01, 0.05, 480))
        stacks.append(SpreadSeries(sid, (D1,), vals))
    m = market_average(stacks)
    mat = np.stack([s.values for s in stacks])
    for t in range(480):
        contrib = mat[:, t][mat[:, t] != 0]
        if len(contrib):
            assert contrib.min() - 1e-15 <= m.values[t] <= contrib.max() + 1e-15
        else:
            assert m.values[t] == 0


def test_series_invariants():
    with pytest.raises(ValueError, match="length"):
        SpreadSeries("A", (D1,), np.ones(200))
    with pytest.raises(ValueError, match="nonnegative"):
        SpreadSeries("A", (D1,), np.full(480, -0.1))
    with pytest.raises(ValueError):
        MarketSeries("m", (D1,), np.ones(480), np.ones(100, dtype=np.int64))


def test_build_series_from_cleaned_corpus(small_corpus):
    path = sorted(small_corpus["dir"].glob("*.csv"))[0]
    cleaned, _ = clean_ticks(parse_tick_file(path).table)
    series = build_spread_series(cleaned)
    assert series.n_days == 6
    assert len(series.values) == 480 * 6
    assert series.values.min() >= 0
    # nonzero only where ticks landed, positive spread where they did
    mat = series.day_matrix()
    assert (mat > 0).mean() > 0.9  # 7s quotes keep nearly every bin filled


def test_series_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    s = SpreadSeries("A", (D1,), rng.uniform(0, 0.05, 480))
    p = tmp_path / "s.csv"
    write_series_csv(s, p)
    assert np.array_equal(read_values_csv(p), s.values)

    m = market_average([s, const_series(0.02, "B")])
    pm = tmp_path / "m.csv"
    write_market_csv(m, pm)
    assert np.array_equal(read_values_csv(pm), m.values)
    assert np.array_equal(read_values_csv(pm, column=2).astype(int), m.n_stocks)
