"""Hypergraph-wavelet stock prediction: indicators, spectra, metrics and the run pipeline."""

import json

from . import _core
from ._core import (
    EstimateError,
    adx,
    atr,
    bollinger,
    ema,
    heat_kernel,
    heat_series_coefficients,
    heat_series_filter,
    hypergraph_operator,
    ic_metrics,
    macd,
    mfi,
    obv,
    prec_at_n,
    rolling_phases,
    rsi,
    run_stage,
    simulate_portfolio,
    sma,
    stochastic,
)

__version__ = _core.__version__

STAGES = ("ingest", "features", "graph", "train", "predict", "backtest", "report")


def default_config():
    return json.loads(_core.default_config())


def run_all(out, data, meta="", config="", ablation=None, seed=None):
    """Runs every stage in order and returns the concatenated log."""
    log = []
    for stage in STAGES:
        log.append(run_stage(stage, out=str(out), data=str(data), meta=str(meta), config=str(config),
                             ablation=ablation, seed=seed))
    return "".join(log)
