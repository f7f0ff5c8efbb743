import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from spreadlab import SynthConfig, gen_quote_stream


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """6 stocks x 6 days, clean data, written once per session."""
    out = tmp_path_factory.mktemp("corpus")
    cfg = SynthConfig(n_stocks=6, n_days=6, seed=11, noise=0.05,
                      amplitude=30.0)
    truth = gen_quote_stream(cfg, out)
    return {"dir": out, "config": cfg, "truth": truth}


@pytest.fixture(scope="session")
def dirty_corpus(tmp_path_factory):
    """2 stocks x 8 days with every error type injected."""
    out = tmp_path_factory.mktemp("dirty")
    cfg = SynthConfig(n_stocks=2, n_days=8, seed=23, noise=0.05,
                      crossed_rate=0.01, sparse_day_rate=0.15,
                      empty_interval_rate=0.15)
    truth = gen_quote_stream(cfg, out)
    return {"dir": out, "config": cfg, "truth": truth}
