"""Synthetic quote streams with known ground truth.

Each (stock, day) draws its own generator seeded from the master seed, so
output is deterministic and independent of generation order.  Tick spreads
follow baseline * (1 + amplitude * tau^-beta) * exp(eps) with lognormal
noise, quantized to 0.001 CNY, so the log-log slope of the recovered
intraday profile is the configured beta whenever amplitude * tau^-beta
dominates 1.
"""
from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import pandas as pd

from .market_data import CHINA_A_SHARES, MILLI, SessionCalendar, bin_index_array

SPARSE_DAY_TICKS = 20  # below any sensible min_day_ticks


@dataclass(frozen=True)
class SynthConfig:
    n_stocks: int = 5
    n_days: int = 20
    beta: float = 0.2            # scalar ground truth ...
    beta_mu: float | None = None  # ... or a per-stock normal law
    beta_sigma: float | None = None
    baseline: float = 0.015      # CNY, late-day spread level
    amplitude: float = 1.7       # open-spike size relative to baseline
    noise: float = 0.1           # lognormal sigma on each tick's spread
    mean_gap_seconds: float = 7.0
    seed: int = 0
    crossed_rate: float = 0.0
    sparse_day_rate: float = 0.0
    empty_interval_rate: float = 0.0
    start_date: str = "2005-01-03"
    mid_price: float = 10.0

    def __post_init__(self):
        for name in ("crossed_rate", "sparse_day_rate", "empty_interval_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_stocks < 1 or self.n_days < 1:
            raise ValueError("need at least one stock and one day")
        if self.mean_gap_seconds < 1.25:
            raise ValueError("mean_gap_seconds too small for 1-second stamps")
        if (self.beta_mu is None) != (self.beta_sigma is None):
            raise ValueError("beta_mu and beta_sigma must be set together")

    def stock_ids(self) -> list[str]:
        return [f"{600000 + i:06d}" for i in range(self.n_stocks)]

    def trading_days(self) -> np.ndarray:
        start = np.datetime64(self.start_date, "D")
        return np.busday_offset(start, np.arange(self.n_days), roll="forward")

    def true_betas(self) -> np.ndarray:
        if self.beta_mu is None:
            return np.full(self.n_stocks, float(self.beta))
        out = np.empty(self.n_stocks)
        for i in range(self.n_stocks):
            rng = np.random.default_rng(
                np.random.SeedSequence(self.seed, spawn_key=(i,)))
            out[i] = rng.normal(self.beta_mu, self.beta_sigma)
        return out


def load_synth_config(path: Path | str) -> SynthConfig:
    """Read a SynthConfig from the [synth] section of an INI file."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(f"config file not found: {path}")
    if not cp.has_section("synth"):
        raise ValueError(f"{path} has no [synth] section")
    sec = cp["synth"]
    kwargs = {}
    for f, caster in (("n_stocks", int), ("n_days", int), ("beta", float),
                      ("beta_mu", float), ("beta_sigma", float),
                      ("baseline", float), ("amplitude", float),
                      ("noise", float), ("mean_gap_seconds", float),
                      ("seed", int), ("crossed_rate", float),
                      ("sparse_day_rate", float),
                      ("empty_interval_rate", float),
                      ("start_date", str), ("mid_price", float)):
        if f in sec:
            kwargs[f] = caster(sec[f])
    return SynthConfig(**kwargs)


def _session_ticks(rng, open_sec: int, close_sec: int, mean_gap: float) -> np.ndarray:
    """Quasi-regular tick seconds in [open, close]: gaps uniform within
    +/-20% of the mean, at least 1 s."""
    lo, hi = 0.8 * mean_gap, 1.2 * mean_gap
    n_draw = int((close_sec - open_sec) / lo) + 2
    gaps = np.maximum(1, np.rint(rng.uniform(lo, hi, n_draw))).astype(np.int64)
    t = open_sec + np.cumsum(gaps)
    return t[t <= close_sec]


def _day_ticks(rng, cfg: SynthConfig, beta: float,
               cal: SessionCalendar) -> tuple[np.ndarray, np.ndarray]:
    """(seconds, ask_milli spread offsets) for one stock-day, errors included."""
    u_sparse = rng.random()
    u_empty = rng.random()

    if u_sparse < cfg.sparse_day_rate:
        sec = np.sort(rng.choice(
            np.concatenate([
                np.arange(cal.morning_open_sec, cal.morning_close_sec),
                np.arange(cal.afternoon_open_sec, cal.afternoon_close_sec)]),
            size=SPARSE_DAY_TICKS, replace=False))
    else:
        sec = np.concatenate([
            _session_ticks(rng, cal.morning_open_sec, cal.morning_close_sec,
                           cfg.mean_gap_seconds),
            _session_ticks(rng, cal.afternoon_open_sec, cal.afternoon_close_sec,
                           cfg.mean_gap_seconds)])

    if u_empty < cfg.empty_interval_rate and len(sec):
        interval = rng.integers(0, cal.intervals_per_day)
        tick_ival = (bin_index_array(sec, cal) - 1) // cal.bins_per_interval
        sec = sec[tick_ival != interval]

    tau = bin_index_array(sec, cal).astype(np.float64)
    shape = cfg.baseline * (1.0 + cfg.amplitude * tau ** (-beta))
    if cfg.noise > 0:
        shape = shape * np.exp(rng.normal(0.0, cfg.noise, len(sec)))
    spread_milli = np.maximum(1, np.rint(shape * MILLI)).astype(np.int64)

    if cfg.crossed_rate > 0 and len(sec):
        crossed = rng.random(len(sec)) < cfg.crossed_rate
        spread_milli[crossed] = -rng.integers(0, 3, int(crossed.sum()))
    return sec, spread_milli


_HMS_LUT: np.ndarray | None = None


def _hms_lut() -> np.ndarray:
    global _HMS_LUT
    if _HMS_LUT is None:
        _HMS_LUT = np.array(
            [f"{s // 3600:02d}:{s % 3600 // 60:02d}:{s % 60:02d}"
             for s in range(86400)])
    return _HMS_LUT


def _price_strings(milli: np.ndarray) -> np.ndarray:
    uniq, inv = np.unique(milli, return_inverse=True)
    strs = np.array([f"{int(m) / MILLI:.3f}" for m in uniq])
    return strs[inv]


def gen_quote_stream(cfg: SynthConfig, out_dir: Path | str,
                     cal: SessionCalendar = CHINA_A_SHARES) -> dict:
    """Write one tick CSV per stock plus ground_truth.json; returns the
    ground-truth dict {stock_id: beta}.  Byte-identical for equal configs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    days = cfg.trading_days()
    day_strs = np.datetime_as_string(days, unit="D")
    betas = cfg.true_betas()
    truth = {}
    for i, stock in enumerate(cfg.stock_ids()):
        bid_milli = int(round(cfg.mid_price * MILLI)) + i
        frames = []
        for d in range(cfg.n_days):
            rng = np.random.default_rng(
                np.random.SeedSequence(cfg.seed, spawn_key=(i, d)))
            sec, spread_milli = _day_ticks(rng, cfg, betas[i], cal)
            ask_milli = bid_milli + spread_milli
            frames.append(pd.DataFrame({
                "stock_id": stock,
                "date": day_strs[d],
                "time": _hms_lut()[sec],
                "bid": f"{bid_milli / MILLI:.3f}",
                "ask": _price_strings(ask_milli),
            }))
        pd.concat(frames, ignore_index=True).to_csv(out / f"{stock}.csv",
                                                    index=False)
        truth[stock] = float(betas[i])
    (out / "ground_truth.json").write_text(
        json.dumps({"config": asdict(cfg), "betas": truth},
                   indent=2, sort_keys=True) + "\n")
    return truth


def gen_profile_sample(n_stocks: int, n_days: int, beta_mu: float,
                       beta_sigma: float, seed: int,
                       baseline: float = 0.002, amplitude: float = 200.0,
                       noise: float = 0.1,
                       bins_per_day: int = 480) -> tuple[np.ndarray, np.ndarray]:
    """Draw per-stock exponents and their day-averaged intraday profiles
    directly (no tick stream), for large-ensemble distribution studies.

    The day average of ``n_days`` lognormal noise factors is approximated
    by its normal limit, so profile bin noise shrinks like 1/sqrt(n_days).
    Returns (betas, profiles) with profiles of shape (n_stocks, bins).
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    betas = rng.normal(beta_mu, beta_sigma, n_stocks)
    tau = np.arange(1, bins_per_day + 1, dtype=np.float64)
    shape = baseline * (1.0 + amplitude * tau[None, :] ** (-betas[:, None]))
    if noise > 0:
        mean_factor = np.exp(noise ** 2 / 2.0)
        rel_sd = np.sqrt((np.exp(noise ** 2) - 1.0) / n_days)
        factors = mean_factor * (1.0 + rng.normal(0.0, rel_sd, shape.shape))
        shape = shape * np.maximum(factors, 1e-12)
    return betas, shape
