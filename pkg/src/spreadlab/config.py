"""Pipeline configuration: dataclass defaults, INI file sections named
after the library modules, and CLI flag overrides (flags win over file
values, file values win over defaults)."""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .scaling import MARKET_TAU_RANGE, STOCK_TAU_RANGE
from .spread import EXCLUDE_ZEROS, INCLUDE_ZEROS

OUT_ENV_VAR = "SPREADLAB_OUT"

# INI section -> {key: (attribute, caster)}
_SCHEMA = {
    "market_data": {
        "input": ("input_glob", str),
        "min_day_ticks": ("min_day_ticks", int),
        "error_cap": ("error_cap", float),
    },
    "spread_core": {
        "mode": ("averaging_mode", str),
    },
    "spectral": {
        "oversample": ("oversample", float),
        "hi_factor": ("hi_factor", float),
        "max_freq": ("max_freq", float),
        "m_independent": ("m_independent", int),
        "harmonics": ("harmonics", int),
        "window": ("window", float),
        "peak_p_max": ("peak_p_max", float),
        "skip_zeros": ("skip_zeros", lambda s: s.lower() in ("1", "true", "yes")),
    },
    "scaling": {
        "tau_min": ("tau_min", int),
        "tau_max": ("tau_max", int),
        "market_tau_min": ("market_tau_min", int),
        "market_tau_max": ("market_tau_max", int),
        "bins": ("dist_bins", int),
        "level": ("dist_level", float),
        "theta_ref": ("theta_ref", float),
        "theta_tol": ("theta_tol", float),
    },
    "cli": {
        "out": ("out_dir", str),
        "jobs": ("jobs", int),
    },
}


@dataclass
class PipelineConfig:
    """Every knob of the end-to-end run; see _SCHEMA for the INI spelling."""

    input_glob: str = ""
    out_dir: str = ""
    min_day_ticks: int = 100
    error_cap: float = 0.01
    averaging_mode: str = EXCLUDE_ZEROS
    oversample: float = 4.0
    hi_factor: float = 1.0
    max_freq: float = 0.0        # >0 caps the Lomb grid below hi_factor's end
    m_independent: int = 0       # 0 -> grid points / oversample
    harmonics: int = 23
    window: float = 0.02
    peak_p_max: float = 0.01      # drop harmonic peaks less significant than this
    skip_zeros: bool = True
    tau_min: int = STOCK_TAU_RANGE[0]
    tau_max: int = STOCK_TAU_RANGE[1]
    market_tau_min: int = MARKET_TAU_RANGE[0]
    market_tau_max: int = MARKET_TAU_RANGE[1]
    dist_bins: int = 100
    dist_level: float = 0.9999
    theta_ref: float = 0.4
    theta_tol: float = 0.1
    jobs: int = 0                # 0 -> one worker per CPU

    def validate(self, need_input: bool = True) -> None:
        if need_input and not self.input_glob:
            raise ValueError("no input files configured (set [market_data] "
                             "input or pass --input)")
        if not self.out_dir:
            raise ValueError(f"no output directory configured (set [cli] out, "
                             f"pass --out, or export {OUT_ENV_VAR})")
        if self.averaging_mode not in (EXCLUDE_ZEROS, INCLUDE_ZEROS):
            raise ValueError(f"averaging mode must be {EXCLUDE_ZEROS!r} or "
                             f"{INCLUDE_ZEROS!r}")
        if self.min_day_ticks < 1:
            raise ValueError("min_day_ticks must be >= 1")
        if not 0 <= self.error_cap <= 1:
            raise ValueError("error_cap must lie in [0, 1]")
        if self.oversample < 1 or self.hi_factor <= 0:
            raise ValueError("oversample >= 1 and hi_factor > 0 required")
        if not 0 < self.window < 0.5:
            raise ValueError("window must lie in (0, 0.5)")
        if not 0 < self.peak_p_max <= 1:
            raise ValueError("peak_p_max must lie in (0, 1]")
        if not (1 <= self.tau_min < self.tau_max
                and 1 <= self.market_tau_min < self.market_tau_max):
            raise ValueError("tau ranges must satisfy 1 <= min < max")
        if self.dist_bins < 4 or not 0 < self.dist_level < 1:
            raise ValueError("dist bins >= 4 and level in (0, 1) required")
        if self.jobs < 0:
            raise ValueError("jobs must be >= 0")

    def effective_jobs(self) -> int:
        return self.jobs if self.jobs > 0 else (os.cpu_count() or 1)


def load_pipeline_config(path: Path | str | None = None,
                         overrides: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig from an optional INI file plus overrides.

    Unknown sections or keys in the file are an error, so typos fail fast.
    The output directory falls back to $SPREADLAB_OUT when neither source
    sets it.
    """
    cfg = PipelineConfig()
    if path is not None:
        cp = configparser.ConfigParser()
        if not cp.read(path):
            raise FileNotFoundError(f"config file not found: {path}")
        for section in cp.sections():
            if section == "synth":
                continue  # owned by load_synth_config
            if section not in _SCHEMA:
                raise ValueError(f"unknown config section [{section}]")
            for key, value in cp[section].items():
                if key not in _SCHEMA[section]:
                    raise ValueError(f"unknown key {key!r} in [{section}]")
                attr, caster = _SCHEMA[section][key]
                setattr(cfg, attr, caster(value))
    valid = {f.name for f in fields(PipelineConfig)}
    for attr, value in (overrides or {}).items():
        if attr not in valid:
            raise ValueError(f"unknown config attribute {attr!r}")
        if value is not None:
            setattr(cfg, attr, value)
    if not cfg.out_dir:
        cfg.out_dir = os.environ.get(OUT_ENV_VAR, "")
    return cfg
