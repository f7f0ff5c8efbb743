"""Stage orchestration: each subcommand is a thin wrapper over the library
modules that reads upstream artifacts, writes its own outputs plus a run
manifest, and never aborts the whole batch on a per-stock failure.

Artifact tree under the output root:

    clean/ticks/<stock>.csv, clean/clean_report.json
    spreads/series/<stock>.csv, spreads/market.csv, spreads/series_meta.json
    lomb/periodogram.csv, lomb/peaks.json, lomb/fundamental.json
    intraday/profiles/<stock>.csv, intraday/market_profile.csv
    fit/fits.json, fit/market_fit.json
    dist/distribution.json, dist/histogram.csv
    classify/classification.json

`all` fuses parse -> clean -> bin per input file (per-stock streaming;
cleaned ticks are not materialized) and then chains the remaining stages.
Every stage writes <stage>/manifest.json with parameters, input digests,
and soft failures, so a rerun with the same inputs is byte-identical.
"""
from __future__ import annotations

import concurrent.futures
import datetime as dt
import glob
import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import PipelineConfig
from .market_data import (CHINA_A_SHARES, CleanReport, SessionCalendar,
                          TickTable, clean_ticks, parse_tick_file)
from .scaling import (classify_relaxation, exponent_sample, fit_power_law,
                      histogram_table, regression_t_test)
from .spectral import (default_freq_grid, detect_harmonic_peaks,
                       estimate_fundamental, lomb_power, power_for_p,
                       series_to_samples)
from .spread import (MarketSeries, SpreadSeries, align_series,
                     build_spread_series, intraday_average, market_average,
                     read_values_csv, write_market_csv, write_profile_csv,
                     write_series_csv)
from .synth import SynthConfig, gen_quote_stream

STAGES = ("clean", "spreads", "lomb", "intraday", "fit", "dist",
          "classify", "synth", "all")


class MissingInputError(FileNotFoundError):
    """An upstream artifact required by this stage does not exist."""


def _require(path: Path, stage: str, hint: str) -> Path:
    if not path.exists():
        raise MissingInputError(
            f"stage '{stage}' needs missing artifact {path} (run '{hint}' first)")
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _relpath(path: Path, out_root: Path) -> str:
    """Paths under the output root are recorded relative to it, so reruns
    into different roots stay byte-comparable."""
    try:
        return str(path.resolve().relative_to(out_root.resolve()))
    except ValueError:
        return str(path)


def _write_manifest(out_root: Path, stage: str, parameters: dict,
                    inputs: list[Path], outputs: list[Path],
                    soft_failures: list | None = None,
                    extra: dict | None = None) -> None:
    payload = {
        "stage": stage,
        "version": __version__,
        "parameters": parameters,
        "inputs": {_relpath(p, out_root): _sha256(p) for p in sorted(inputs)},
        "outputs": sorted(_relpath(p, out_root) for p in outputs),
        "soft_failures": soft_failures or [],
    }
    if extra:
        payload.update(extra)
    _write_json(out_root / stage / "manifest.json", payload)


def _input_files(cfg: PipelineConfig) -> list[Path]:
    files = sorted(Path(p) for p in glob.glob(cfg.input_glob))
    if not files:
        raise MissingInputError(f"no input files match {cfg.input_glob!r}")
    return files


# ---------------------------------------------------------------------------
# ingestion workers (module level so process pools can pickle them)
# ---------------------------------------------------------------------------

def _ingest_file(path_str: str, min_day_ticks: int, error_cap: float,
                 cal: SessionCalendar, want: str) -> dict:
    """Parse + clean one file; return series or the cleaned table."""
    res = parse_tick_file(path_str, error_cap)
    cleaned, report = clean_ticks(res.table, cal, min_day_ticks)
    out = {"file": path_str, "n_rows": res.n_rows,
           "n_row_errors": len(res.errors), "report": report}
    if want == "table":
        out["table"] = cleaned
    else:
        out["series"] = [build_spread_series(sub, cal)
                         for _, sub in cleaned.iter_stock_groups()]
    return out


def _ingest_all(files: list[Path], cfg: PipelineConfig, cal: SessionCalendar,
                want: str) -> list[dict]:
    jobs = min(cfg.effective_jobs(), len(files))
    args = [(str(f), cfg.min_day_ticks, cfg.error_cap, cal, want) for f in files]
    if jobs <= 1 or len(files) == 1:
        return [_ingest_file(*a) for a in args]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_ingest_file, *zip(*args), chunksize=1))


def _merge_series(results: list[dict]) -> tuple[list[SpreadSeries], CleanReport, list[dict]]:
    """Combine per-file ingestion results; a stock may span files only with
    disjoint trading days."""
    report = CleanReport()
    by_stock: dict[str, list[SpreadSeries]] = {}
    row_errors = []
    for res in sorted(results, key=lambda r: r["file"]):
        report = report.merge(res["report"])
        if res["n_row_errors"]:
            row_errors.append({"file": res["file"],
                               "malformed_rows": res["n_row_errors"]})
        for s in res["series"]:
            by_stock.setdefault(s.stock_id, []).append(s)
    merged = []
    for stock in sorted(by_stock):
        parts = by_stock[stock]
        if len(parts) == 1:
            merged.append(parts[0])
            continue
        day_rows = [(d, p.day_matrix()[i]) for p in parts
                    for i, d in enumerate(p.days)]
        days = [d for d, _ in day_rows]
        if len(set(days)) != len(days):
            raise ValueError(
                f"stock {stock}: the same trading day appears in multiple "
                f"input files; merge those files before running")
        day_rows.sort(key=lambda r: r[0])
        merged.append(SpreadSeries(
            stock, tuple(d for d, _ in day_rows),
            np.concatenate([row for _, row in day_rows]),
            parts[0].bins_per_day))
    return merged, report, row_errors


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def run_synth(synth_cfg: SynthConfig, out_root: Path | str) -> Path:
    out_root = Path(out_root)
    tick_dir = out_root / "synth"
    gen_quote_stream(synth_cfg, tick_dir)
    outputs = sorted(tick_dir.glob("*.csv")) + [tick_dir / "ground_truth.json"]
    _write_manifest(out_root, "synth", {"config": synth_cfg.__dict__}, [],
                    outputs)
    return tick_dir


def run_clean(cfg: PipelineConfig, cal: SessionCalendar = CHINA_A_SHARES) -> CleanReport:
    out_root = Path(cfg.out_dir)
    files = _input_files(cfg)
    results = _ingest_all(files, cfg, cal, want="table")
    report = CleanReport()
    tick_dir = out_root / "clean" / "ticks"
    tick_dir.mkdir(parents=True, exist_ok=True)
    row_errors = []
    tables: dict[str, list] = {}
    for res in sorted(results, key=lambda r: r["file"]):
        report = report.merge(res["report"])
        if res["n_row_errors"]:
            row_errors.append({"file": res["file"],
                               "malformed_rows": res["n_row_errors"]})
        for stock, sub in res["table"].iter_stock_groups():
            tables.setdefault(stock, []).append(sub)
    outputs = []
    for stock in sorted(tables):
        parts = tables[stock]
        table = parts[0] if len(parts) == 1 else TickTable.concat(parts)
        path = tick_dir / f"{stock}.csv"
        table.write_csv(path)
        outputs.append(path)
    report_path = out_root / "clean" / "clean_report.json"
    report.to_json(report_path)
    outputs.append(report_path)
    _write_manifest(out_root, "clean",
                    {"min_day_ticks": cfg.min_day_ticks,
                     "error_cap": cfg.error_cap}, files, outputs,
                    extra={"row_errors": row_errors})
    return report


def _write_spreads(out_root: Path, series: list[SpreadSeries],
                   cal: SessionCalendar) -> tuple[list[Path], MarketSeries]:
    series_dir = out_root / "spreads" / "series"
    series_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for s in series:
        path = series_dir / f"{s.stock_id}.csv"
        write_series_csv(s, path)
        outputs.append(path)
    aligned = align_series(series)
    market = market_average(aligned)
    market_path = out_root / "spreads" / "market.csv"
    write_market_csv(market, market_path)
    meta = {
        "bins_per_day": cal.bins_per_day,
        "days": {s.stock_id: [d.isoformat() for d in s.days] for s in series},
        "market_days": [d.isoformat() for d in market.days],
    }
    meta_path = out_root / "spreads" / "series_meta.json"
    _write_json(meta_path, meta)
    outputs += [market_path, meta_path]
    return outputs, market


def run_spreads(cfg: PipelineConfig, cal: SessionCalendar = CHINA_A_SHARES) -> None:
    """Build per-stock series and the market average from cleaned ticks."""
    out_root = Path(cfg.out_dir)
    tick_dir = out_root / "clean" / "ticks"
    _require(tick_dir, "spreads", "clean")
    files = sorted(tick_dir.glob("*.csv"))
    if not files:
        raise MissingInputError(f"stage 'spreads' found no tick files in {tick_dir}")
    results = _ingest_all(files, cfg, cal, want="series")
    series, _, row_errors = _merge_series(results)
    outputs, _ = _write_spreads(out_root, series, cal)
    _write_manifest(out_root, "spreads", {"min_day_ticks": cfg.min_day_ticks},
                    files, outputs, extra={"row_errors": row_errors})


def _lomb_grid(cfg: PipelineConfig, n_samples: int, span: int) -> np.ndarray:
    freqs = default_freq_grid(n_samples, span, cfg.oversample, cfg.hi_factor)
    if cfg.max_freq > 0:
        freqs = freqs[freqs <= cfg.max_freq]
        if len(freqs) == 0:
            raise ValueError(f"max_freq {cfg.max_freq} leaves an empty grid")
    return freqs


def run_lomb(cfg: PipelineConfig, cal: SessionCalendar = CHINA_A_SHARES) -> dict:
    out_root = Path(cfg.out_dir)
    market_path = _require(out_root / "spreads" / "market.csv", "lomb", "spreads")
    values = read_values_csv(market_path)
    t, y = series_to_samples(values, skip_zeros=cfg.skip_zeros)
    freqs = _lomb_grid(cfg, len(y), len(values))
    m = cfg.m_independent if cfg.m_independent > 0 else None
    pg = lomb_power(t, y, freqs, oversample=cfg.oversample, m_independent=m)

    pg_path = out_root / "lomb" / "periodogram.csv"
    pg_path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"frequency": pg.frequency,
                  "power": pg.power}).to_csv(pg_path, index=False)

    f0_guess = 1.0 / cal.bins_per_day
    n_max = min(cfg.harmonics, int(pg.frequency[-1] / f0_guess))
    if n_max < 1:
        raise ValueError("frequency grid does not reach the daily frequency; "
                         "raise hi_factor or max_freq")
    min_power = (0.0 if cfg.peak_p_max >= 1
                 else power_for_p(cfg.peak_p_max, pg.m_independent))
    peaks = detect_harmonic_peaks(pg, f0_guess, n_max=n_max, window=cfg.window,
                                  min_power=min_power)
    peaks_path = out_root / "lomb" / "peaks.json"
    _write_json(peaks_path, peaks.to_dicts())

    fundamental: dict | None = None
    if len(peaks.harmonic_pairs()) >= 2:
        fit = estimate_fundamental(peaks)
        fundamental = {"f0": fit.f0, "stderr": fit.stderr,
                       "n_harmonics": fit.n_harmonics,
                       "harmonics": list(fit.harmonics),
                       "residuals": fit.residuals.tolist()}
    fund_path = out_root / "lomb" / "fundamental.json"
    _write_json(fund_path, fundamental)

    _write_manifest(out_root, "lomb",
                    {"oversample": cfg.oversample, "hi_factor": cfg.hi_factor,
                     "max_freq": cfg.max_freq, "m_independent": pg.m_independent,
                     "harmonics": n_max, "window": cfg.window,
                     "peak_p_max": cfg.peak_p_max,
                     "skip_zeros": cfg.skip_zeros},
                    [market_path], [pg_path, peaks_path, fund_path])
    return {"periodogram": pg, "peaks": peaks, "fundamental": fundamental}


def run_intraday(cfg: PipelineConfig, cal: SessionCalendar = CHINA_A_SHARES) -> None:
    out_root = Path(cfg.out_dir)
    meta_path = _require(out_root / "spreads" / "series_meta.json",
                         "intraday", "spreads")
    meta = json.loads(meta_path.read_text())
    bins = meta["bins_per_day"]
    prof_dir = out_root / "intraday" / "profiles"
    prof_dir.mkdir(parents=True, exist_ok=True)
    inputs, outputs = [meta_path], []
    for stock, days in sorted(meta["days"].items()):
        spath = _require(out_root / "spreads" / "series" / f"{stock}.csv",
                         "intraday", "spreads")
        inputs.append(spath)
        series = SpreadSeries(
            stock, tuple(dt.date.fromisoformat(d) for d in days),
            read_values_csv(spath), bins)
        profile = intraday_average(series, cfg.averaging_mode)
        out = prof_dir / f"{stock}.csv"
        write_profile_csv(profile, out)
        outputs.append(out)

    market_path = _require(out_root / "spreads" / "market.csv",
                           "intraday", "spreads")
    inputs.append(market_path)
    mvalues = read_values_csv(market_path)
    mseries = MarketSeries(
        "market", tuple(dt.date.fromisoformat(d) for d in meta["market_days"]),
        mvalues, read_values_csv(market_path, column=2).astype(np.int64), bins)
    mprofile = intraday_average(mseries, cfg.averaging_mode)
    mpath = out_root / "intraday" / "market_profile.csv"
    write_profile_csv(mprofile, mpath)
    outputs.append(mpath)
    _write_manifest(out_root, "intraday", {"mode": cfg.averaging_mode},
                    inputs, outputs)


def run_fit(cfg: PipelineConfig) -> dict:
    out_root = Path(cfg.out_dir)
    prof_dir = _require(out_root / "intraday" / "profiles", "fit", "intraday")
    market_prof = _require(out_root / "intraday" / "market_profile.csv",
                           "fit", "intraday")
    fits, soft_failures, inputs = [], [], [market_prof]
    for path in sorted(prof_dir.glob("*.csv")):
        inputs.append(path)
        stock = path.stem
        try:
            fit = fit_power_law(read_values_csv(path),
                                (cfg.tau_min, cfg.tau_max), stock_id=stock)
            fits.append(fit.to_dict())
        except ValueError as exc:
            soft_failures.append({"stock_id": stock, "stage": "fit",
                                  "error": str(exc)})
    fits_path = out_root / "fit" / "fits.json"
    _write_json(fits_path, fits)

    mfit = fit_power_law(read_values_csv(market_prof),
                         (cfg.market_tau_min, cfg.market_tau_max),
                         stock_id="market")
    ttest = regression_t_test(mfit)
    payload = mfit.to_dict()
    payload.update({"t_critical": ttest.critical, "t_quantile": ttest.quantile,
                    "slope_significant": ttest.reject_zero_slope})
    mfit_path = out_root / "fit" / "market_fit.json"
    _write_json(mfit_path, payload)
    _write_manifest(out_root, "fit",
                    {"tau_min": cfg.tau_min, "tau_max": cfg.tau_max,
                     "market_tau_min": cfg.market_tau_min,
                     "market_tau_max": cfg.market_tau_max},
                    inputs, [fits_path, mfit_path], soft_failures)
    return {"fits": fits, "market_fit": payload,
            "soft_failures": soft_failures}


def run_dist(cfg: PipelineConfig) -> dict:
    out_root = Path(cfg.out_dir)
    fits_path = _require(out_root / "fit" / "fits.json", "dist", "fit")
    fits = json.loads(fits_path.read_text())
    if len(fits) < 4:
        raise ValueError(f"distribution stage needs >= 4 fitted stocks, "
                         f"got {len(fits)}")
    sample = exponent_sample([f["stock_id"] for f in fits],
                             [f["beta"] for f in fits],
                             bins=cfg.dist_bins, level=cfg.dist_level)
    dist_path = out_root / "dist" / "distribution.json"
    _write_json(dist_path, sample.to_dict())
    hist_path = out_root / "dist" / "histogram.csv"
    with open(hist_path, "w") as fh:
        fh.write("bin_center,count,fitted_normal_density\n")
        for center, count, dens in histogram_table(sample):
            fh.write(f"{center!r},{count},{dens!r}\n")
    _write_manifest(out_root, "dist",
                    {"bins": cfg.dist_bins, "level": cfg.dist_level},
                    [fits_path], [dist_path, hist_path])
    return sample.to_dict()


def run_classify(cfg: PipelineConfig) -> dict:
    out_root = Path(cfg.out_dir)
    mfit_path = _require(out_root / "fit" / "market_fit.json", "classify", "fit")
    fits_path = _require(out_root / "fit" / "fits.json", "classify", "fit")
    market = json.loads(mfit_path.read_text())
    fits = json.loads(fits_path.read_text())
    payload = {
        "market": classify_relaxation(market["beta"], cfg.theta_ref,
                                      cfg.theta_tol).to_dict(),
        "stocks": [
            {"stock_id": f["stock_id"],
             **classify_relaxation(f["beta"], cfg.theta_ref,
                                   cfg.theta_tol).to_dict()}
            for f in fits],
    }
    cls_path = out_root / "classify" / "classification.json"
    _write_json(cls_path, payload)
    _write_manifest(out_root, "classify",
                    {"theta_ref": cfg.theta_ref, "theta_tol": cfg.theta_tol},
                    [mfit_path, fits_path], [cls_path])
    return payload


def run_all(cfg: PipelineConfig, cal: SessionCalendar = CHINA_A_SHARES) -> dict:
    """Fused end-to-end run: ticks are parsed, cleaned, and binned one file
    at a time (cleaned ticks stay in memory per stock and are not written),
    then the downstream stages run from the spreads artifacts."""
    out_root = Path(cfg.out_dir)
    files = _input_files(cfg)
    results = _ingest_all(files, cfg, cal, want="series")
    series, report, row_errors = _merge_series(results)
    if not series:
        raise ValueError("cleaning removed every tick; nothing to analyze")
    report_path = out_root / "clean" / "clean_report.json"
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report.to_json(report_path)
    _write_manifest(out_root, "clean",
                    {"min_day_ticks": cfg.min_day_ticks,
                     "error_cap": cfg.error_cap, "fused": True},
                    files, [report_path], extra={"row_errors": row_errors})
    outputs, _ = _write_spreads(out_root, series, cal)
    _write_manifest(out_root, "spreads", {"min_day_ticks": cfg.min_day_ticks,
                                          "fused": True}, files, outputs,
                    extra={"row_errors": row_errors})
    lomb = run_lomb(cfg, cal)
    run_intraday(cfg, cal)
    fit = run_fit(cfg)
    dist = run_dist(cfg)
    cls = run_classify(cfg)
    return {"clean_report": report, "lomb": lomb, "fit": fit, "dist": dist,
            "classify": cls}
