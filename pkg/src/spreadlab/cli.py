"""Command line entry point: ``spreadlab <subcommand> [--config file] [flags]``.

Subcommands mirror the pipeline stages; flags override config-file values,
which override built-in defaults.  Fatal errors exit nonzero; per-stock
soft failures are recorded in the stage manifest and do not fail the run.
"""
from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import load_pipeline_config
from .market_data import TickParseError
from .synth import SynthConfig, load_synth_config

# flag name -> (PipelineConfig attribute, type)
_FLAGS = {
    "--input": ("input_glob", str),
    "--out": ("out_dir", str),
    "--min-day-ticks": ("min_day_ticks", int),
    "--error-cap": ("error_cap", float),
    "--mode": ("averaging_mode", str),
    "--oversample": ("oversample", float),
    "--hi-factor": ("hi_factor", float),
    "--max-freq": ("max_freq", float),
    "--m-independent": ("m_independent", int),
    "--harmonics": ("harmonics", int),
    "--window": ("window", float),
    "--peak-p-max": ("peak_p_max", float),
    "--tau-min": ("tau_min", int),
    "--tau-max": ("tau_max", int),
    "--market-tau-min": ("market_tau_min", int),
    "--market-tau-max": ("market_tau_max", int),
    "--bins": ("dist_bins", int),
    "--level": ("dist_level", float),
    "--theta-ref": ("theta_ref", float),
    "--theta-tol": ("theta_tol", float),
    "--jobs": ("jobs", int),
}

_STAGE_RUNNERS = {
    "clean": pipeline.run_clean,
    "spreads": pipeline.run_spreads,
    "lomb": pipeline.run_lomb,
    "intraday": pipeline.run_intraday,
    "fit": pipeline.run_fit,
    "dist": pipeline.run_dist,
    "classify": pipeline.run_classify,
    "all": pipeline.run_all,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="spreadlab",
        description="Intraday bid-ask spread analytics pipeline")
    sub = ap.add_subparsers(dest="stage", required=True)
    for stage in pipeline.STAGES:
        if stage == "synth":
            continue
        sp = sub.add_parser(stage, help=f"run the {stage} stage")
        sp.add_argument("--config", help="INI config file")
        for flag, (attr, typ) in _FLAGS.items():
            sp.add_argument(flag, dest=attr, type=typ, default=None)
    sy = sub.add_parser("synth", help="generate a synthetic tick corpus")
    sy.add_argument("--config", help="INI config file with a [synth] section")
    sy.add_argument("--out", dest="out_dir", default=None,
                    help="output root (tick files land in <out>/synth)")
    sy.add_argument("--seed", type=int, default=None)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.stage == "synth":
            synth_cfg = (load_synth_config(args.config) if args.config
                         else SynthConfig())
            if args.seed is not None:
                synth_cfg = SynthConfig(**{**synth_cfg.__dict__,
                                           "seed": args.seed})
            cfg = load_pipeline_config(args.config,
                                       {"out_dir": args.out_dir})
            cfg.validate(need_input=False)
            tick_dir = pipeline.run_synth(synth_cfg, cfg.out_dir)
            print(f"synth: wrote {synth_cfg.n_stocks} stocks x "
                  f"{synth_cfg.n_days} days under {tick_dir}")
            return 0

        overrides = {attr: getattr(args, attr) for attr, _ in _FLAGS.values()}
        cfg = load_pipeline_config(args.config, overrides)
        cfg.validate(need_input=args.stage in ("clean", "all"))
        _STAGE_RUNNERS[args.stage](cfg)
        print(f"{args.stage}: ok ({cfg.out_dir})")
        return 0
    except (ValueError, TickParseError, FileNotFoundError) as exc:
        print(f"spreadlab {args.stage}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
