"""Tick ingestion: CSV parsing, quote cleaning, and session binning.

Raw quote files follow the schema ``stock_id,date,time,bid,ask`` (header
required, date ``YYYY-MM-DD``, time ``HH:MM:SS``, prices in CNY with up to
three decimals).  Prices are held internally as integer multiples of
0.001 CNY so that spreads stay exact until averaged.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

TICK_COLUMNS = ("stock_id", "date", "time", "bid", "ask")

MILLI = 1000  # price quantum: 0.001 CNY


class TickParseError(ValueError):
    """Raised when a tick source cannot be parsed at all, or when the
    fraction of malformed rows exceeds the configured cap."""


def _tod_seconds(t: dt.time) -> int:
    return t.hour * 3600 + t.minute * 60 + t.second


@dataclass(frozen=True)
class SessionCalendar:
    """Trading-session clock: two continuous-auction sessions per day,
    evenly divided into 30-second bins and eight coarse intervals.

    The default instance models the Chinese A-share day: 09:30-11:30 and
    13:00-15:00, giving 480 bins of 30 s and eight 30-minute intervals.
    """

    morning_open: dt.time = dt.time(9, 30)
    morning_close: dt.time = dt.time(11, 30)
    afternoon_open: dt.time = dt.time(13, 0)
    afternoon_close: dt.time = dt.time(15, 0)
    bin_seconds: int = 30
    intervals_per_day: int = 8

    def __post_init__(self):
        mo, mc = _tod_seconds(self.morning_open), _tod_seconds(self.morning_close)
        ao, ac = _tod_seconds(self.afternoon_open), _tod_seconds(self.afternoon_close)
        if not (mo < mc <= ao < ac):
            raise ValueError("session boundaries out of order")
        if (mc - mo) % self.bin_seconds or (ac - ao) % self.bin_seconds:
            raise ValueError("session lengths must be whole multiples of bin_seconds")
        if self.bins_per_day % self.intervals_per_day:
            raise ValueError("bins_per_day must divide evenly into intervals")
        ival_bins = self.bins_per_day // self.intervals_per_day
        if self.morning_bins % ival_bins or (self.bins_per_day - self.morning_bins) % ival_bins:
            raise ValueError("intervals must tile each session exactly")

    @property
    def morning_open_sec(self) -> int:
        return _tod_seconds(self.morning_open)

    @property
    def morning_close_sec(self) -> int:
        return _tod_seconds(self.morning_close)

    @property
    def afternoon_open_sec(self) -> int:
        return _tod_seconds(self.afternoon_open)

    @property
    def afternoon_close_sec(self) -> int:
        return _tod_seconds(self.afternoon_close)

    @property
    def morning_bins(self) -> int:
        return (self.morning_close_sec - self.morning_open_sec) // self.bin_seconds

    @property
    def bins_per_day(self) -> int:
        afternoon = (self.afternoon_close_sec - self.afternoon_open_sec) // self.bin_seconds
        return self.morning_bins + afternoon

    @property
    def bins_per_interval(self) -> int:
        return self.bins_per_day // self.intervals_per_day


CHINA_A_SHARES = SessionCalendar()


@dataclass(frozen=True)
class QuoteTick:
    """One best-bid/best-ask observation, prices in 0.001-CNY units."""

    stock_id: str
    timestamp: dt.datetime
    bid_milli: int
    ask_milli: int

    @property
    def bid(self) -> float:
        return self.bid_milli / MILLI

    @property
    def ask(self) -> float:
        return self.ask_milli / MILLI

    @classmethod
    def from_prices(cls, stock_id: str, timestamp: dt.datetime,
                    bid: float, ask: float) -> "QuoteTick":
        return cls(stock_id, timestamp,
                   int(round(bid * MILLI)), int(round(ask * MILLI)))


@dataclass(frozen=True)
class RowError:
    """A malformed input row: 1-based source line, offending field, reason."""

    line: int
    column: str
    message: str


@dataclass(frozen=True)
class TickTable:
    """Column-oriented tick storage, sorted by (stock, day, second).

    ``stock_idx`` indexes into the sorted unique ``stocks`` tuple; prices
    are int64 milli-CNY.  Immutable and safe to share across workers.
    """

    stocks: tuple[str, ...]
    stock_idx: np.ndarray   # int32, per row
    day: np.ndarray         # datetime64[D], per row
    sec: np.ndarray         # int32 second-of-day, per row
    bid: np.ndarray         # int64 milli-CNY
    ask: np.ndarray         # int64 milli-CNY

    def __len__(self) -> int:
        return len(self.sec)

    def take(self, mask_or_idx) -> "TickTable":
        idx = self.stock_idx[mask_or_idx]
        present = np.unique(idx)
        remap = np.zeros(len(self.stocks), dtype=np.int32)
        remap[present] = np.arange(len(present), dtype=np.int32)
        return TickTable(
            stocks=tuple(self.stocks[i] for i in present),
            stock_idx=remap[idx],
            day=self.day[mask_or_idx],
            sec=self.sec[mask_or_idx],
            bid=self.bid[mask_or_idx],
            ask=self.ask[mask_or_idx],
        )

    def iter_stock_groups(self) -> Iterator[tuple[str, "TickTable"]]:
        """Yield (stock_id, sub-table) in sorted stock order."""
        if not len(self):
            return
        bounds = _run_bounds(self.stock_idx)
        for lo, hi in bounds:
            yield self.stocks[self.stock_idx[lo]], self.take(slice(lo, hi))

    def iter_day_groups(self) -> Iterator[tuple[np.datetime64, slice]]:
        """Yield (day, row slice) runs; rows must belong to one stock."""
        if not len(self):
            return
        key = self.stock_idx.astype(np.int64) * (1 << 32) + self.day.astype(np.int64)
        for lo, hi in _run_bounds(key):
            yield self.day[lo], slice(lo, hi)

    def day_list(self) -> list[dt.date]:
        """Distinct trading days present, ascending."""
        return [d.astype(dt.date) for d in np.unique(self.day)]

    def to_quote_ticks(self) -> list[QuoteTick]:
        out = []
        for i in range(len(self)):
            day = self.day[i].astype(dt.date)
            s = int(self.sec[i])
            ts = dt.datetime.combine(day, dt.time(s // 3600, s % 3600 // 60, s % 60))
            out.append(QuoteTick(self.stocks[self.stock_idx[i]], ts,
                                 int(self.bid[i]), int(self.ask[i])))
        return out

    @classmethod
    def from_quote_ticks(cls, ticks: Sequence[QuoteTick]) -> "TickTable":
        stocks = sorted({t.stock_id for t in ticks})
        lookup = {s: i for i, s in enumerate(stocks)}
        n = len(ticks)
        stock_idx = np.fromiter((lookup[t.stock_id] for t in ticks), np.int32, n)
        day = np.array([np.datetime64(t.timestamp.date()) for t in ticks],
                       dtype="datetime64[D]") if n else np.empty(0, "datetime64[D]")
        sec = np.fromiter((_tod_seconds(t.timestamp.time()) for t in ticks), np.int32, n)
        bid = np.fromiter((t.bid_milli for t in ticks), np.int64, n)
        ask = np.fromiter((t.ask_milli for t in ticks), np.int64, n)
        return _sorted_table(tuple(stocks), stock_idx, day, sec, bid, ask)

    @classmethod
    def empty(cls) -> "TickTable":
        return cls((), np.empty(0, np.int32), np.empty(0, "datetime64[D]"),
                   np.empty(0, np.int32), np.empty(0, np.int64), np.empty(0, np.int64))

    @classmethod
    def concat(cls, tables: Sequence["TickTable"]) -> "TickTable":
        tables = [t for t in tables if len(t)]
        if not tables:
            return cls.empty()
        stocks = sorted({s for t in tables for s in t.stocks})
        lookup = {s: i for i, s in enumerate(stocks)}
        idx = np.concatenate([
            np.array([lookup[s] for s in t.stocks], dtype=np.int32)[t.stock_idx]
            for t in tables])
        return _sorted_table(
            tuple(stocks), idx,
            np.concatenate([t.day for t in tables]),
            np.concatenate([t.sec for t in tables]),
            np.concatenate([t.bid for t in tables]),
            np.concatenate([t.ask for t in tables]))

    def write_csv(self, path: Path | str) -> None:
        """Write back out in the input schema (prices with 3 decimals)."""
        df = pd.DataFrame({
            "stock_id": np.asarray(self.stocks, dtype=object)[self.stock_idx]
            if len(self) else np.empty(0, object),
            "date": np.datetime_as_string(self.day, unit="D"),
            "time": _via_unique(self.sec, lambda s: f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"),
            "bid": _via_unique(self.bid, _fmt_price),
            "ask": _via_unique(self.ask, _fmt_price),
        })
        df.to_csv(path, index=False)


def _fmt_price(milli: int) -> str:
    return f"{int(milli) / MILLI:.3f}"


def _via_unique(values: np.ndarray, fmt) -> np.ndarray:
    """Format an int array as strings, formatting each distinct value once."""
    if not len(values):
        return np.empty(0, object)
    uniq, inv = np.unique(values, return_inverse=True)
    return np.array([fmt(int(v)) for v in uniq], dtype=object)[inv]


def _run_bounds(key: np.ndarray) -> list[tuple[int, int]]:
    change = np.flatnonzero(np.diff(key)) + 1
    edges = np.concatenate(([0], change, [len(key)]))
    return list(zip(edges[:-1], edges[1:]))


def _sorted_table(stocks, stock_idx, day, sec, bid, ask) -> TickTable:
    order = np.lexsort((sec, day.astype(np.int64), stock_idx))
    if not np.array_equal(order, np.arange(len(order))):
        stock_idx, day, sec = stock_idx[order], day[order], sec[order]
        bid, ask = bid[order], ask[order]
    return TickTable(stocks, stock_idx, day, sec, bid, ask)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def parse_tick_file(source, error_cap: float = 0.01,
                    columns: Sequence[str] = TICK_COLUMNS) -> "ParseResult":
    """Parse one tick CSV into a TickTable plus row-level errors.

    Parameters
    ----------
    source : path, str or readable file object
        UTF-8 CSV with header ``stock_id,date,time,bid,ask``.
    error_cap : float
        Maximum tolerated fraction of malformed rows; exceeding it raises
        :class:`TickParseError`.  Malformed rows below the cap are skipped
        and reported with their 1-based line numbers.
    columns : sequence of str
        Expected header, for files carrying the standard fields in a
        different order.

    Returns
    -------
    ParseResult
        Table sorted by (stock, day, second); duplicate timestamps are kept
        in file order.
    """
    if set(columns) != set(TICK_COLUMNS):
        raise ValueError(f"schema must carry the fields {TICK_COLUMNS}")
    try:
        raw = pd.read_csv(source, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        return ParseResult(TickTable.empty(), [], 0)
    except (OSError, UnicodeDecodeError) as exc:
        raise TickParseError(f"unreadable tick source: {exc}") from exc
    if tuple(raw.columns) != tuple(columns):
        raise TickParseError(
            f"header mismatch: expected {','.join(columns)}, "
            f"got {','.join(map(str, raw.columns))}")

    n = len(raw)
    if n == 0:
        return ParseResult(TickTable.empty(), [], 0)
    lines = np.arange(2, n + 2)  # header is line 1
    errors: list[RowError] = []
    bad = np.zeros(n, dtype=bool)

    def flag(mask: np.ndarray, column: str, message: str) -> None:
        fresh = mask & ~bad
        for ln in lines[fresh]:
            errors.append(RowError(int(ln), column, message))
        bad[fresh] = True

    sid = raw["stock_id"].to_numpy()
    flag(sid == "", "stock_id", "empty stock id")

    day_vals, day_bad = _parse_dates(raw["date"])
    flag(day_bad, "date", "unparseable date (want YYYY-MM-DD)")
    sec_vals, sec_bad = _parse_times(raw["time"])
    flag(sec_bad, "time", "unparseable time (want HH:MM:SS)")
    bid_vals, bid_bad = _parse_prices(raw["bid"])
    flag(bid_bad, "bid", "invalid price")
    ask_vals, ask_bad = _parse_prices(raw["ask"])
    flag(ask_bad, "ask", "invalid price")

    n_bad = int(bad.sum())
    if n_bad and n_bad / n > error_cap:
        raise TickParseError(
            f"{n_bad}/{n} malformed rows exceeds error cap {error_cap}")

    good = ~bad
    stocks_arr = sid[good].astype(str)
    uniq, codes = np.unique(stocks_arr, return_inverse=True)
    table = _sorted_table(tuple(str(s) for s in uniq), codes.astype(np.int32),
                          day_vals[good], sec_vals[good].astype(np.int32),
                          bid_vals[good], ask_vals[good])
    return ParseResult(table, errors, n)


@dataclass(frozen=True)
class ParseResult:
    table: TickTable
    errors: list[RowError]
    n_rows: int

    def ticks(self) -> list[QuoteTick]:
        return self.table.to_quote_ticks()


def _parse_dates(col: pd.Series) -> tuple[np.ndarray, np.ndarray]:
    codes, uniques = pd.factorize(col)
    parsed = pd.to_datetime(pd.Index(uniques), format="%Y-%m-%d", errors="coerce")
    vals = parsed.values.astype("datetime64[D]")
    bad_u = pd.isna(parsed.values)
    day = np.where(bad_u[codes], np.datetime64("NaT", "D"), vals[codes])
    return day.astype("datetime64[D]"), bad_u[codes]


def _parse_times(col: pd.Series) -> tuple[np.ndarray, np.ndarray]:
    codes, uniques = pd.factorize(col)
    secs = np.empty(len(uniques), dtype=np.int64)
    bad_u = np.zeros(len(uniques), dtype=bool)
    for i, s in enumerate(uniques):
        v = _parse_hms(s)
        if v is None:
            bad_u[i] = True
            secs[i] = 0
        else:
            secs[i] = v
    return secs[codes], bad_u[codes]


def _parse_hms(s: str) -> int | None:
    if len(s) != 8 or s[2] != ":" or s[5] != ":":
        return None
    try:
        h, m, sec = int(s[0:2]), int(s[3:5]), int(s[6:8])
    except ValueError:
        return None
    if not (0 <= h < 24 and 0 <= m < 60 and 0 <= sec < 60):
        return None
    return h * 3600 + m * 60 + sec


def _parse_prices(col: pd.Series) -> tuple[np.ndarray, np.ndarray]:
    x = pd.to_numeric(col, errors="coerce").to_numpy(dtype=np.float64)
    milli_f = x * MILLI
    milli = np.round(milli_f)
    with np.errstate(invalid="ignore"):
        bad = (~np.isfinite(x)) | (milli <= 0) | (np.abs(milli_f - milli) > 1e-6)
    out = np.where(bad, 0, milli).astype(np.int64)
    return out, bad


# ---------------------------------------------------------------------------
# session binning
# ---------------------------------------------------------------------------

def bin_index(tod: dt.time | int, cal: SessionCalendar = CHINA_A_SHARES) -> int | None:
    """Map a time of day to its 30-second bin (1-based), or None outside
    the sessions.  Session-close instants land in the final bin of their
    session."""
    if isinstance(tod, dt.time):
        if tod.microsecond:
            raise ValueError("tick timestamps carry whole-second resolution")
        s = _tod_seconds(tod)
    else:
        s = int(tod)
    if cal.morning_open_sec <= s <= cal.morning_close_sec:
        return min((s - cal.morning_open_sec) // cal.bin_seconds,
                   cal.morning_bins - 1) + 1
    if cal.afternoon_open_sec <= s <= cal.afternoon_close_sec:
        return cal.morning_bins + min(
            (s - cal.afternoon_open_sec) // cal.bin_seconds,
            cal.bins_per_day - cal.morning_bins - 1) + 1
    return None


def bin_index_array(sec: np.ndarray, cal: SessionCalendar = CHINA_A_SHARES) -> np.ndarray:
    """Vectorized :func:`bin_index`; 0 marks out-of-session samples."""
    sec = np.asarray(sec)
    out = np.zeros(sec.shape, dtype=np.int32)
    am = (sec >= cal.morning_open_sec) & (sec <= cal.morning_close_sec)
    out[am] = np.minimum((sec[am] - cal.morning_open_sec) // cal.bin_seconds,
                         cal.morning_bins - 1) + 1
    pm = (sec >= cal.afternoon_open_sec) & (sec <= cal.afternoon_close_sec)
    pm_bins = cal.bins_per_day - cal.morning_bins
    out[pm] = cal.morning_bins + np.minimum(
        (sec[pm] - cal.afternoon_open_sec) // cal.bin_seconds, pm_bins - 1) + 1
    return out


# ---------------------------------------------------------------------------
# cleaning
# ---------------------------------------------------------------------------

@dataclass
class CleanReport:
    """Per-rule removal accounting; tick counts are conserved:
    the four removal counts plus ``retained_ticks`` equal ``input_ticks``."""

    input_ticks: int = 0
    crossed_ticks: int = 0
    low_freq_day_ticks: int = 0
    low_freq_days: int = 0
    out_of_session_ticks: int = 0
    empty_interval_day_ticks: int = 0
    empty_interval_days: int = 0
    retained_ticks: int = 0
    retained_days_per_stock: dict[str, int] = field(default_factory=dict)
    min_day_ticks: int = 0

    @property
    def removed_ticks(self) -> int:
        return (self.crossed_ticks + self.low_freq_day_ticks
                + self.out_of_session_ticks + self.empty_interval_day_ticks)

    def merge(self, other: "CleanReport") -> "CleanReport":
        merged = CleanReport(min_day_ticks=self.min_day_ticks or other.min_day_ticks)
        for f in ("input_ticks", "crossed_ticks", "low_freq_day_ticks",
                  "low_freq_days", "out_of_session_ticks",
                  "empty_interval_day_ticks", "empty_interval_days",
                  "retained_ticks"):
            setattr(merged, f, getattr(self, f) + getattr(other, f))
        merged.retained_days_per_stock = dict(self.retained_days_per_stock)
        for k, v in other.retained_days_per_stock.items():
            merged.retained_days_per_stock[k] = merged.retained_days_per_stock.get(k, 0) + v
        return merged

    def to_dict(self) -> dict:
        return {
            "input_ticks": self.input_ticks,
            "removed": {
                "crossed_quote_ticks": self.crossed_ticks,
                "low_frequency_day_ticks": self.low_freq_day_ticks,
                "out_of_session_ticks": self.out_of_session_ticks,
                "empty_interval_day_ticks": self.empty_interval_day_ticks,
            },
            "removed_days": {
                "low_frequency": self.low_freq_days,
                "empty_interval": self.empty_interval_days,
            },
            "retained_ticks": self.retained_ticks,
            "retained_days_per_stock": dict(sorted(self.retained_days_per_stock.items())),
            "min_day_ticks": self.min_day_ticks,
        }

    def to_json(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def clean_ticks(table: TickTable, cal: SessionCalendar = CHINA_A_SHARES,
                min_day_ticks: int = 100) -> tuple[TickTable, CleanReport]:
    """Apply the four cleaning rules and return (retained ticks, report).

    Rules, in order: (1) drop crossed or locked quotes (ask <= bid);
    (2) drop whole (stock, day) groups with fewer than ``min_day_ticks``
    in-session uncrossed ticks; (3) drop out-of-session ticks; (4) drop
    whole days in which any of the eight coarse intervals has no tick.

    Rule 2 counts in-session ticks so that cleaning is idempotent: a day
    kept once is kept again with an identical report on the second pass.
    """
    rep = CleanReport(input_ticks=len(table), min_day_ticks=min_day_ticks)
    if not len(table):
        return table, rep

    bins = bin_index_array(table.sec, cal)
    in_session = bins > 0
    uncrossed = table.ask > table.bid
    rep.crossed_ticks = int((~uncrossed).sum())

    # contiguous (stock, day) groups; table is kept sorted
    gkey = table.stock_idx.astype(np.int64) * (1 << 32) + table.day.astype(np.int64)
    edges = np.concatenate(([0], np.flatnonzero(np.diff(gkey)) + 1, [len(table)]))
    group_of = np.repeat(np.arange(len(edges) - 1), np.diff(edges))
    n_groups = len(edges) - 1

    session_counts = np.bincount(group_of[uncrossed & in_session], minlength=n_groups)
    survivors = np.bincount(group_of[uncrossed], minlength=n_groups)
    low = (session_counts < min_day_ticks) & (survivors > 0)
    rep.low_freq_days = int(low.sum())
    keep = uncrossed & ~low[group_of]
    rep.low_freq_day_ticks = int((uncrossed & low[group_of]).sum())

    out_mask = keep & ~in_session
    rep.out_of_session_ticks = int(out_mask.sum())
    keep &= in_session

    ival = np.zeros(len(table), dtype=np.int64)
    ival[keep] = (bins[keep] - 1) // cal.bins_per_interval
    covered = np.zeros((n_groups, cal.intervals_per_day), dtype=bool)
    covered[group_of[keep], ival[keep]] = True
    alive = np.bincount(group_of[keep], minlength=n_groups) > 0
    gappy = alive & ~covered.all(axis=1)
    rep.empty_interval_days = int(gappy.sum())
    gap_mask = keep & gappy[group_of]
    rep.empty_interval_day_ticks = int(gap_mask.sum())
    keep &= ~gappy[group_of]

    rep.retained_ticks = int(keep.sum())
    kept_groups = np.flatnonzero(np.bincount(group_of[keep], minlength=n_groups) > 0)
    for g in kept_groups:
        stock = table.stocks[table.stock_idx[edges[g]]]
        rep.retained_days_per_stock[stock] = rep.retained_days_per_stock.get(stock, 0) + 1

    return table.take(keep), rep
