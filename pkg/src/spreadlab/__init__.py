"""spreadlab: intraday bid-ask spread analytics.

Tick cleaning, 30-second spread series, Lomb periodicity detection,
intraday pattern extraction, and power-law relaxation fitting, with a
synthetic quote generator for ground-truth testing.
"""

__version__ = "0.1.0"

from .market_data import (CHINA_A_SHARES, CleanReport, QuoteTick, RowError,
                          SessionCalendar, TickParseError, TickTable,
                          bin_index, bin_index_array, clean_ticks,
                          parse_tick_file)
from .spread import (EXCLUDE_ZEROS, INCLUDE_ZEROS, IntradayProfile,
                     MarketSeries, SpreadSeries, align_series,
                     bin_day_spreads, build_spread_series, intraday_average,
                     market_average, point_spread)
from .spectral import (FundamentalFit, Peak, PeakSet, Periodogram,
                       default_freq_grid, detect_harmonic_peaks,
                       estimate_fundamental, lomb_power, peak_significance,
                       series_to_samples, strongest_peak)
from .scaling import (Chi2Result, ExponentSample, Moments, PowerLawFit,
                      RelaxationClass, TTestResult, chi2_normality,
                      classify_relaxation, exponent_moments, exponent_sample,
                      fit_power_law, histogram_table, regression_t_test)
from .synth import SynthConfig, gen_profile_sample, gen_quote_stream, load_synth_config
from .config import PipelineConfig, load_pipeline_config

__all__ = [
    "__version__",
    "CHINA_A_SHARES", "CleanReport", "QuoteTick", "RowError",
    "SessionCalendar", "TickParseError", "TickTable", "bin_index",
    "bin_index_array", "clean_ticks", "parse_tick_file",
    "EXCLUDE_ZEROS", "INCLUDE_ZEROS", "IntradayProfile", "MarketSeries",
    "SpreadSeries", "align_series", "bin_day_spreads", "build_spread_series",
    "intraday_average", "market_average", "point_spread",
    "FundamentalFit", "Peak", "PeakSet", "Periodogram", "default_freq_grid",
    "detect_harmonic_peaks", "estimate_fundamental", "lomb_power",
    "peak_significance", "series_to_samples", "strongest_peak",
    "Chi2Result", "ExponentSample", "Moments", "PowerLawFit",
    "RelaxationClass", "TTestResult", "chi2_normality", "classify_relaxation",
    "exponent_moments", "exponent_sample", "fit_power_law", "histogram_table",
    "regression_t_test",
    "SynthConfig", "gen_profile_sample", "gen_quote_stream",
    "load_synth_config", "PipelineConfig", "load_pipeline_config",
]
