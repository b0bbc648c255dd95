import math
from pathlib import Path

import numpy as np
import pytest

import estimate

ROOT = Path(__file__).resolve().parents[2]


def random_bars(n=60, seed=0):
    rng = np.random.default_rng(seed)
    close = 50 * np.exp(np.cumsum(0.02 * rng.standard_normal(n)))
    open_ = close * (1 + 0.005 * rng.standard_normal(n))
    high = np.maximum(open_, close) * 1.01
    low = np.minimum(open_, close) * 0.99
    volume = rng.uniform(1e5, 1e6, n)
    return open_, high, low, close, volume


def test_version():
    assert estimate.__version__.startswith("0.1.0")


def test_moving_averages_and_rsi():
    x = np.arange(1.0, 11.0)
    s = estimate.sma(x, 3)
    assert math.isnan(s[1])
    assert s[2] == pytest.approx(2.0)
    e = estimate.ema(x, 1)
    assert np.allclose(e, x)
    r = estimate.rsi(x, 5)
    assert r[5] == 100.0


def test_bounded_oscillators():
    bars = random_bars()
    for fn in (estimate.stochastic, estimate.mfi, estimate.adx):
        v = fn(*bars)
        v = v[~np.isnan(v)]
        assert v.size > 0
        assert (v >= 0).all() and (v <= 100).all()
    lower, middle, upper = estimate.bollinger(*bars, n=20)
    ok = ~np.isnan(middle)
    assert (lower[ok] <= middle[ok]).all() and (middle[ok] <= upper[ok]).all()


def test_two_node_operator():
    theta, lap = estimate.hypergraph_operator(np.ones((2, 1)), np.array([0.7]))
    assert np.allclose(theta, 0.5)
    assert np.allclose(np.linalg.eigvalsh(lap), [0.0, 1.0])


def test_heat_series_converges_to_kernel():
    rng = np.random.default_rng(3)
    inc = (rng.random((8, 4)) < 0.4).astype(float)
    inc = np.hstack([inc, np.eye(8)])
    w = rng.uniform(0.1, 1.0, inc.shape[1])
    exact = estimate.heat_kernel(inc, w, 1.0)
    approx = estimate.heat_series_filter(inc, w, 1.0, 12)
    assert np.abs(exact - approx).max() < 1e-8


def test_metrics():
    m = estimate.ic_metrics(np.array([[1.0, 2, 3], [3, 2, 1]]), np.array([[1.0, 2, 3], [1, 2, 3]]))
    assert m["ic"] == pytest.approx(0.0)
    assert m["rank_ic"] == pytest.approx(0.0)
    assert estimate.prec_at_n(np.array([0.5, 0.9, 0.9, 0.1]), np.array([1.0, -1, 2, 3]), 2) == 0.5
    with pytest.raises(estimate.EstimateError):
        estimate.ic_metrics(np.ones((1, 3)), np.ones((1, 3)))


def test_take_profit_trace():
    o = np.array([[100.0, 100, 115, 118]])
    h = np.array([[100.0, 105, 125, 119]])
    l = np.array([[100.0, 99, 114, 117]])
    c = np.array([[100.0, 104, 118, 118]])
    nv, trades = estimate.simulate_portfolio(o, h, l, c, [0], np.array([[1.0]]), top_k=1)
    assert nv[-1] == pytest.approx(1.2)
    assert trades[0]["reason"] == "take_profit"
    assert trades[0]["exit_price"] == pytest.approx(120.0)


def test_rolling_phases():
    phases = estimate.rolling_phases(1593)
    assert len(phases) == 8
    assert phases[1]["train"][0] - phases[0]["train"][0] == 163
    assert phases[0]["test"][1] - phases[0]["test"][0] == 126


def test_default_config_roundtrip():
    cfg = estimate.default_config()
    assert cfg["stride_days"] == 163
    assert cfg["trailing_stop"] == pytest.approx(0.07)


def test_unknown_stage():
    with pytest.raises(estimate.EstimateError):
        estimate.run_stage("fly")


def test_ingest_bundled_data(tmp_path):
    log = estimate.run_stage("ingest", out=str(tmp_path), data=str(ROOT / "data" / "ohlcv.csv"),
                             meta=str(ROOT / "data" / "meta.csv"))
    assert (tmp_path / "panel.csv").exists()
    assert (tmp_path / "manifest.json").exists()
    assert isinstance(log, str)
