"""Spread series construction: per-stock 30-second series, market averages
across stocks, and intraday profiles averaged over trading days.

A value of exactly 0 in a series is the "no data in this bin" sentinel;
genuine spreads are strictly positive after cleaning.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .market_data import (MILLI, CHINA_A_SHARES, QuoteTick, SessionCalendar,
                          TickTable, bin_index_array)

INCLUDE_ZEROS = "include-zeros"
EXCLUDE_ZEROS = "exclude-zeros"


def point_spread(tick: QuoteTick) -> float:
    """Best ask minus best bid, in CNY.  Requires a cleaned tick."""
    if tick.ask_milli <= tick.bid_milli:
        raise ValueError(
            f"crossed quote (ask {tick.ask} <= bid {tick.bid}); clean first")
    return (tick.ask_milli - tick.bid_milli) / MILLI


@dataclass(frozen=True)
class SpreadSeries:
    """One stock's 30-second spread vector over its trading days.

    ``values`` has length ``bins_per_day * len(days)``; day ``d`` (0-based)
    occupies the slice ``[480 d, 480 (d+1))`` for the default calendar.
    """

    stock_id: str
    days: tuple[dt.date, ...]
    values: np.ndarray
    bins_per_day: int = 480

    def __post_init__(self):
        if len(self.values) != self.bins_per_day * len(self.days):
            raise ValueError("series length must be bins_per_day * n_days")
        if len(self.values) and self.values.min() < 0:
            raise ValueError("spread values must be nonnegative")

    @property
    def n_days(self) -> int:
        return len(self.days)

    def day_matrix(self) -> np.ndarray:
        return self.values.reshape(self.n_days, self.bins_per_day)


@dataclass(frozen=True)
class MarketSeries:
    """Cross-stock average series; ``n_stocks[t]`` counts the stocks with a
    nonzero spread in bin t (the averaging set)."""

    tag: str
    days: tuple[dt.date, ...]
    values: np.ndarray
    n_stocks: np.ndarray
    bins_per_day: int = 480

    def __post_init__(self):
        if len(self.values) != self.bins_per_day * len(self.days):
            raise ValueError("series length must be bins_per_day * n_days")
        if len(self.values) != len(self.n_stocks):
            raise ValueError("n_stocks must align with values")

    @property
    def n_days(self) -> int:
        return len(self.days)

    def day_matrix(self) -> np.ndarray:
        return self.values.reshape(self.n_days, self.bins_per_day)


@dataclass(frozen=True)
class IntradayProfile:
    """Day-averaged spread by intraday bin tau = 1..bins_per_day."""

    values: np.ndarray
    n_days: int
    mode: str
    source_id: str = ""

    def __post_init__(self):
        if self.mode not in (INCLUDE_ZEROS, EXCLUDE_ZEROS):
            raise ValueError(f"unknown averaging mode {self.mode!r}")

    @property
    def bins_per_day(self) -> int:
        return len(self.values)


def bin_day_spreads(ticks, cal: SessionCalendar = CHINA_A_SHARES) -> np.ndarray:
    """Average point spreads into the day's bins; empty bins hold 0.

    ``ticks`` is a sequence of cleaned QuoteTicks from a single
    (stock, day), or a single-day TickTable.
    """
    if isinstance(ticks, TickTable):
        sec = ticks.sec
        spread_milli = (ticks.ask - ticks.bid).astype(np.float64)
    else:
        sec = np.array([_tod(t.timestamp) for t in ticks], dtype=np.int64)
        spread_milli = np.array(
            [t.ask_milli - t.bid_milli for t in ticks], dtype=np.float64)
    if np.any(spread_milli <= 0):
        raise ValueError("crossed quotes present; clean before binning")
    return _bin_arrays(sec, spread_milli, cal)


def _tod(ts: dt.datetime) -> int:
    return ts.hour * 3600 + ts.minute * 60 + ts.second


def _bin_arrays(sec: np.ndarray, spread_milli: np.ndarray,
                cal: SessionCalendar) -> np.ndarray:
    bins = bin_index_array(sec, cal)
    if np.any(bins == 0):
        raise ValueError("out-of-session ticks present; clean before binning")
    idx = bins - 1
    sums = np.bincount(idx, weights=spread_milli, minlength=cal.bins_per_day)
    counts = np.bincount(idx, minlength=cal.bins_per_day)
    out = np.zeros(cal.bins_per_day)
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz] / MILLI
    return out


def build_spread_series(table: TickTable,
                        cal: SessionCalendar = CHINA_A_SHARES) -> SpreadSeries:
    """Assemble a cleaned single-stock TickTable into its SpreadSeries."""
    if len(table.stocks) != 1:
        raise ValueError("build_spread_series expects exactly one stock")
    spread_milli = (table.ask - table.bid).astype(np.float64)
    days = []
    chunks = []
    for day, rows in table.iter_day_groups():
        days.append(day.astype(dt.date))
        chunks.append(_bin_arrays(table.sec[rows], spread_milli[rows], cal))
    values = np.concatenate(chunks) if chunks else np.empty(0)
    return SpreadSeries(table.stocks[0], tuple(days), values, cal.bins_per_day)


def align_series(series: Sequence[SpreadSeries],
                 days: Sequence[dt.date] | None = None) -> list[SpreadSeries]:
    """Re-index every series onto a common day list (default: the sorted
    union), zero-filling days a stock did not trade."""
    if days is None:
        all_days = sorted({d for s in series for d in s.days})
    else:
        all_days = sorted(days)
    pos = {d: i for i, d in enumerate(all_days)}
    out = []
    for s in series:
        mat = np.zeros((len(all_days), s.bins_per_day))
        for i, d in enumerate(s.days):
            mat[pos[d]] = s.day_matrix()[i]
        out.append(SpreadSeries(s.stock_id, tuple(all_days), mat.ravel(),
                                s.bins_per_day))
    return out


def market_average(series: Sequence[SpreadSeries], tag: str = "market") -> MarketSeries:
    """Bin-wise mean over the stocks with data in that bin.

    All inputs must share one trading-day list (see :func:`align_series`);
    bins where no stock has data yield 0 with a contributor count of 0.
    """
    if not series:
        raise ValueError("market_average needs at least one series")
    days = series[0].days
    for s in series[1:]:
        if s.days != days:
            raise ValueError(
                f"misaligned day lists: {s.stock_id} differs from {series[0].stock_id}")
    stack = np.stack([s.values for s in series])
    nz = stack != 0
    n = nz.sum(axis=0)
    sums = np.where(nz, stack, 0.0).sum(axis=0)
    values = np.divide(sums, n, out=np.zeros_like(sums), where=n > 0)
    return MarketSeries(tag, days, values, n.astype(np.int64),
                        series[0].bins_per_day)


def intraday_average(series: SpreadSeries | MarketSeries,
                     mode: str = EXCLUDE_ZEROS) -> IntradayProfile:
    """Average the series over trading days at fixed intraday bin.

    ``include-zeros`` divides the per-bin sum by the day count, treating
    no-data sentinels as zero observations; ``exclude-zeros`` divides by
    the number of days with data in that bin (0 if none).
    """
    if series.n_days == 0:
        raise ValueError("cannot average an empty series")
    mat = series.day_matrix()
    if mode == INCLUDE_ZEROS:
        prof = mat.mean(axis=0)
    elif mode == EXCLUDE_ZEROS:
        n = (mat != 0).sum(axis=0)
        prof = np.divide(mat.sum(axis=0), n, out=np.zeros(mat.shape[1]),
                         where=n > 0)
    else:
        raise ValueError(f"unknown averaging mode {mode!r}")
    source = series.stock_id if isinstance(series, SpreadSeries) else series.tag
    return IntradayProfile(prof, series.n_days, mode, source)


# ---------------------------------------------------------------------------
# CSV emitters / readers for pipeline artifacts
# ---------------------------------------------------------------------------

def write_series_csv(series: SpreadSeries, path: Path | str) -> None:
    pd.DataFrame({"index": np.arange(1, len(series.values) + 1),
                  "value": series.values}).to_csv(path, index=False)


def write_market_csv(market: MarketSeries, path: Path | str) -> None:
    pd.DataFrame({"index": np.arange(1, len(market.values) + 1),
                  "value": market.values,
                  "n_stocks": market.n_stocks}).to_csv(path, index=False)


def write_profile_csv(profile: IntradayProfile, path: Path | str) -> None:
    pd.DataFrame({"tau": np.arange(1, len(profile.values) + 1),
                  "value": profile.values}).to_csv(path, index=False)


def read_values_csv(path: Path | str, column: int = 1) -> np.ndarray:
    """Read one column back from any of the emitters above, bit-exact."""
    df = pd.read_csv(path, float_precision="round_trip")
    return df.iloc[:, column].to_numpy(dtype=np.float64)
