import datetime as dt
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spreadlab import (CHINA_A_SHARES, QuoteTick, SessionCalendar,
                       TickParseError, TickTable, bin_index, bin_index_array,
                       clean_ticks, parse_tick_file)

CAL = CHINA_A_SHARES
HEADER = "stock_id,date,time,bid,ask\n"


def parse_text(text, **kw):
    return parse_tick_file(io.StringIO(text), **kw)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def test_parse_single_row_field_mapping():
    res = parse_text(HEADER + "600100,2005-01-04,09:31:05,10.52,10.55\n")
    assert res.n_rows == 1 and not res.errors
    (tick,) = res.ticks()
    assert tick == QuoteTick("600100", dt.datetime(2005, 1, 4, 9, 31, 5),
                             10520, 10550)
    assert tick.bid == 10.52 and tick.ask == 10.55


def test_parse_empty_file():
    res = parse_text("")
    assert len(res.table) == 0 and res.errors == [] and res.n_rows == 0
    res = parse_text(HEADER)
    assert len(res.table) == 0 and res.errors == []


def test_parse_malformed_bid_collected_not_fatal():
    res = parse_text(HEADER
                     + "600100,2005-01-04,09:31:05,abc,10.55\n"
                     + "600100,2005-01-04,09:31:11,10.52,10.55\n",
                     error_cap=0.5)
    assert len(res.table) == 1
    (err,) = res.errors
    assert err.line == 2 and err.column == "bid"


@pytest.mark.parametrize("row,column", [
    ("600100,2005/01/04,09:31:05,10.52,10.55", "date"),
    ("600100,2005-01-04,9:31:05,10.52,10.55", "time"),
    ("600100,2005-01-04,09:61:05,10.52,10.55", "time"),
    ("600100,2005-01-04,09:31:05,-10.52,10.55", "bid"),
    ("600100,2005-01-04,09:31:05,10.52,0", "ask"),
    ("600100,2005-01-04,09:31:05,10.5204,10.55", "bid"),
    (",2005-01-04,09:31:05,10.52,10.55", "stock_id"),
])
def test_parse_rejects_bad_fields(row, column):
    res = parse_text(HEADER + row + "\n", error_cap=1.0)
    assert len(res.table) == 0
    assert res.errors[0].column == column


def test_parse_header_mismatch():
    with pytest.raises(TickParseError, match="header"):
        parse_text("symbol,date,time,bid,ask\nX,2005-01-04,09:31:05,1,2\n")


def test_parse_reordered_schema():
    text = ("date,time,stock_id,ask,bid\n"
            "2005-01-04,09:31:05,600100,10.55,10.52\n")
    res = parse_text(text, columns=("date", "time", "stock_id", "ask", "bid"))
    (tick,) = res.ticks()
    assert tick.bid_milli == 10520 and tick.ask_milli == 10550
    with pytest.raises(ValueError, match="fields"):
        parse_text(text, columns=("date", "time", "stock_id", "ask", "mid"))


def test_parse_error_cap_exceeded():
    rows = "600100,2005-01-04,09:31:05,bad,10.55\n" * 5
    rows += "600100,2005-01-04,09:31:06,10.52,10.55\n" * 5
    with pytest.raises(TickParseError, match="error cap"):
        parse_text(HEADER + rows, error_cap=0.2)


def test_parse_sorts_within_stock_and_day():
    res = parse_text(HEADER
                     + "600100,2005-01-05,09:31:05,10.52,10.55\n"
                     + "600100,2005-01-04,10:00:00,10.52,10.55\n"
                     + "000001,2005-01-04,09:30:00,5.00,5.01\n"
                     + "600100,2005-01-04,09:31:05,10.52,10.55\n")
    ticks = res.ticks()
    assert [t.stock_id for t in ticks] == ["000001", "600100", "600100", "600100"]
    assert ticks[1].timestamp < ticks[2].timestamp < ticks[3].timestamp


def test_parse_keeps_duplicate_timestamps_in_file_order():
    res = parse_text(HEADER
                     + "600100,2005-01-04,09:31:05,10.52,10.55\n"
                     + "600100,2005-01-04,09:31:05,10.50,10.51\n")
    ticks = res.ticks()
    assert len(ticks) == 2
    assert ticks[0].bid_milli == 10520 and ticks[1].bid_milli == 10500


# ---------------------------------------------------------------------------
# session calendar / binning
# ---------------------------------------------------------------------------

def test_calendar_defaults():
    assert CAL.bins_per_day == 480
    assert CAL.morning_bins == 240
    assert CAL.bins_per_interval == 60
    assert (CAL.morning_close_sec - CAL.morning_open_sec
            + CAL.afternoon_close_sec - CAL.afternoon_open_sec) \
        // CAL.bin_seconds == 480


def test_calendar_rejects_untileable_sessions():
    with pytest.raises(ValueError):
        SessionCalendar(morning_close=dt.time(11, 30, 15))
    with pytest.raises(ValueError):
        SessionCalendar(intervals_per_day=7)
    with pytest.raises(ValueError):
        SessionCalendar(morning_open=dt.time(12, 0), morning_close=dt.time(11, 0))


@pytest.mark.parametrize("tod,expected", [
    (dt.time(9, 30, 0), 1),
    (dt.time(9, 30, 29), 1),
    (dt.time(9, 30, 30), 2),
    (dt.time(11, 29, 59), 240),
    (dt.time(11, 30, 0), 240),   # close instant joins the last bin
    (dt.time(13, 0, 0), 241),
    (dt.time(14, 59, 59), 480),
    (dt.time(15, 0, 0), 480),
    (dt.time(12, 15, 0), None),
    (dt.time(9, 29, 59), None),
    (dt.time(15, 0, 1), None),
    (dt.time(11, 30, 1), None),
])
def test_bin_index_examples(tod, expected):
    assert bin_index(tod) == expected


def test_bin_index_rejects_subsecond():
    with pytest.raises(ValueError):
        bin_index(dt.time(9, 30, 0, 500))


def test_bin_index_brute_force_scan():
    # every half-open in-session second maps to exactly one bin, the map is
    # monotone, all 480 bins appear, and each covers exactly 30 seconds
    morning = range(CAL.morning_open_sec, CAL.morning_close_sec)
    afternoon = range(CAL.afternoon_open_sec, CAL.afternoon_close_sec)
    seen = {}
    prev = 0
    for s in [*morning, *afternoon]:
        b = bin_index(s)
        assert b is not None and 1 <= b <= 480
        assert b >= prev
        prev = b
        seen[b] = seen.get(b, 0) + 1
    assert len(seen) == 480
    assert all(c == 30 for c in seen.values())
    # boundary instants are the only extras
    assert bin_index(CAL.morning_close_sec) == 240
    assert bin_index(CAL.afternoon_close_sec) == 480
    for s in range(0, 86400, 7):
        if not (CAL.morning_open_sec <= s <= CAL.morning_close_sec
                or CAL.afternoon_open_sec <= s <= CAL.afternoon_close_sec):
            assert bin_index(s) is None


def test_bin_index_array_matches_scalar():
    sec = np.arange(0, 86400, 11)
    vec = bin_index_array(sec)
    for s, b in zip(sec, vec):
        assert (bin_index(int(s)) or 0) == b


# ---------------------------------------------------------------------------
# cleaning
# ---------------------------------------------------------------------------

def make_tick(stock="600100", day=4, sec=34200, bid=10000, spread=30):
    s = int(sec)
    ts = dt.datetime(2005, 1, day, s // 3600, s % 3600 // 60, s % 60)
    return QuoteTick(stock, ts, bid, bid + spread)


def full_day(stock="600100", day=4, step=60, spread=30):
    """One tick every `step` seconds through both sessions."""
    ticks = []
    for s in range(CAL.morning_open_sec, CAL.morning_close_sec, step):
        ticks.append(make_tick(stock, day, s, spread=spread))
    for s in range(CAL.afternoon_open_sec, CAL.afternoon_close_sec, step):
        ticks.append(make_tick(stock, day, s, spread=spread))
    return ticks


def test_clean_removes_crossed_and_locked_quotes():
    ticks = full_day()
    ticks.append(make_tick(sec=36000 + 7, spread=0))    # locked: ask == bid
    ticks.append(make_tick(sec=36000 + 13, spread=-5))  # crossed
    table = TickTable.from_quote_ticks(ticks)
    cleaned, rep = clean_ticks(table, min_day_ticks=10)
    assert rep.crossed_ticks == 2
    assert rep.retained_ticks == len(ticks) - 2
    assert np.all(cleaned.ask > cleaned.bid)


def test_clean_drops_low_frequency_day():
    ticks = full_day(day=4) + full_day(day=5)[:50]  # day 5 sparse
    table = TickTable.from_quote_ticks(ticks)
    cleaned, rep = clean_ticks(table, min_day_ticks=100)
    assert rep.low_freq_days == 1
    assert rep.low_freq_day_ticks == 50
    assert rep.retained_days_per_stock == {"600100": 1}
    assert len(np.unique(cleaned.day)) == 1


def test_clean_removes_out_of_session_ticks():
    ticks = full_day()
    early = make_tick(sec=9 * 3600 + 20 * 60)  # 09:20:00
    lunch = make_tick(sec=12 * 3600)
    table = TickTable.from_quote_ticks(ticks + [early, lunch])
    cleaned, rep = clean_ticks(table, min_day_ticks=10)
    assert rep.out_of_session_ticks == 2
    assert rep.retained_ticks == len(ticks)


def test_clean_drops_day_with_empty_interval():
    # remove every tick from the 3rd half-hour interval (bins 121..180)
    ticks = [t for t in full_day()
             if not (10 * 3600 + 30 * 60 <= _sec(t) < 11 * 3600)]
    good = full_day(day=5)
    table = TickTable.from_quote_ticks(ticks + good)
    cleaned, rep = clean_ticks(table, min_day_ticks=10)
    assert rep.empty_interval_days == 1
    assert rep.empty_interval_day_ticks == len(ticks)
    assert rep.retained_days_per_stock == {"600100": 1}
    assert cleaned.day_list() == [dt.date(2005, 1, 5)]


def _sec(tick):
    t = tick.timestamp.time()
    return t.hour * 3600 + t.minute * 60 + t.second


def test_clean_conservation_and_report_counts(dirty_corpus):
    from spreadlab import parse_tick_file
    for path in sorted(dirty_corpus["dir"].glob("*.csv")):
        res = parse_tick_file(path)
        _, rep = clean_ticks(res.table)
        assert rep.removed_ticks + rep.retained_ticks == rep.input_ticks
        assert rep.input_ticks == len(res.table)


def test_clean_is_idempotent_on_dirty_corpus(dirty_corpus):
    from spreadlab import parse_tick_file
    for path in sorted(dirty_corpus["dir"].glob("*.csv")):
        table = parse_tick_file(path).table
        once, rep1 = clean_ticks(table)
        twice, rep2 = clean_ticks(once)
        assert rep2.removed_ticks == 0
        assert rep2.retained_ticks == rep1.retained_ticks
        assert np.array_equal(once.sec, twice.sec)
        assert np.array_equal(once.ask, twice.ask)


_tick_strategy = st.builds(
    make_tick,
    stock=st.sampled_from(["600100", "000001"]),
    day=st.integers(4, 5),
    sec=st.integers(9 * 3600, 15 * 3600 + 300),
    bid=st.integers(1, 20000),
    spread=st.integers(-3, 40),
)


@given(st.lists(_tick_strategy, max_size=120))
@settings(max_examples=60, deadline=None)
def test_clean_properties_random_ticks(ticks):
    table = TickTable.from_quote_ticks(ticks)
    cleaned, rep = clean_ticks(table, min_day_ticks=3)
    assert rep.removed_ticks + rep.retained_ticks == rep.input_ticks == len(ticks)
    assert np.all(cleaned.ask > cleaned.bid)
    assert np.all(bin_index_array(cleaned.sec) > 0)
    again, rep2 = clean_ticks(cleaned, min_day_ticks=3)
    assert rep2.removed_ticks == 0 and len(again) == len(cleaned)
    assert sum(rep.retained_days_per_stock.values()) == \
        len({(s, d) for s, d in zip(cleaned.stock_idx, cleaned.day)})


def test_clean_report_json_roundtrip(tmp_path, dirty_corpus):
    import json
    from spreadlab import parse_tick_file
    path = sorted(dirty_corpus["dir"].glob("*.csv"))[0]
    _, rep = clean_ticks(parse_tick_file(path).table)
    out = tmp_path / "report.json"
    rep.to_json(out)
    payload = json.loads(out.read_text())
    removed = payload["removed"]
    assert sum(removed.values()) + payload["retained_ticks"] == payload["input_ticks"]
    assert payload["min_day_ticks"] == 100


def test_write_csv_roundtrip(tmp_path, small_corpus):
    path = sorted(small_corpus["dir"].glob("*.csv"))[0]
    table = parse_tick_file(path).table
    out = tmp_path / "roundtrip.csv"
    table.write_csv(out)
    again = parse_tick_file(out).table
    assert np.array_equal(table.sec, again.sec)
    assert np.array_equal(table.bid, again.bid)
    assert np.array_equal(table.ask, again.ask)
    assert table.stocks == again.stocks
