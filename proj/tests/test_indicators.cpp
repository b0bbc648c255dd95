#include <doctest.h>

#include <cmath>

#include "estimate/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace estimate;
using namespace estimate::indicators;

namespace {

void check_series(const std::vector<double>& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t t = 0; t < got.size(); ++t) {
    INFO("t = " << t << " got " << got[t] << " want " << want[t]);
    CHECK(oracle::close_to(got[t], want[t]));
  }
}

}  // namespace

TEST_SUITE("indicators") {
  TEST_CASE("moving averages against direct and closed forms") {
    std::mt19937_64 rng(1);
    auto s = testsupport::random_series(50, rng);
    for (std::size_t n : {1u, 5u, 20u}) {
      check_series(sma(s.close, n), oracle::sma(s.close, n));
      check_series(ema(s.close, n), oracle::ema(s.close, n));
    }
    auto ma = moving_averages(s.volume, 10);
    check_series(ma.ema, oracle::ema(s.volume, 10));
    CHECK_THROWS_AS(moving_averages(s.close, 0), Error);
  }

  TEST_CASE("price ratios on a hand bar") {
    market::OhlcvBar bar{{}, 9, 12, 8, 10, 1};
    std::vector<double> closes{11, 8, 12.5, 10};
    auto r = price_ratios(bar, closes);
    CHECK(r.ar_open == doctest::Approx(0.9));
    CHECK(r.ar_high == doctest::Approx(1.2));
    CHECK(r.ar_low == doctest::Approx(0.8));
    CHECK(r.rc_min == doctest::Approx(1.25));
    CHECK(r.rc_max == doctest::Approx(0.8));
    bar.close = 0;
    CHECK_THROWS_AS(price_ratios(bar, closes), Error);
  }

  TEST_CASE("RSI and MACD against unrolled sums") {
    std::mt19937_64 rng(2);
    auto s = testsupport::random_series(50, rng);
    check_series(rsi(s.close, 14), oracle::rsi(s.close, 14));
    check_series(rsi(s.close, 3), oracle::rsi(s.close, 3));
    check_series(macd(s.close, 12, 26), oracle::macd(s.close, 12, 26));
  }

  TEST_CASE("stochastic, MFI, ATR, Bollinger, OBV from window definitions") {
    std::mt19937_64 rng(4);
    auto s = testsupport::random_series(50, rng);
    check_series(stochastic(s, 14), oracle::stochastic(s, 14));
    check_series(mfi(s, 14), oracle::mfi(s, 14));
    check_series(atr(s, 14), oracle::atr(s, 14));
    auto b = bollinger(s, 14, 2.0);
    auto [up, lo] = oracle::bollinger(s, 14, 2.0);
    check_series(b.upper, up);
    check_series(b.lower, lo);
    check_series(obv(s), oracle::obv(s));
  }

  TEST_CASE("ADX from smoothed directional sums") {
    std::mt19937_64 rng(5);
    auto s = testsupport::random_series(50, rng);
    auto r = trend_adx(s, 5);
    auto o = oracle::adx(s, 5);
    check_series(r.smooth_plus, o.smooth_plus);
    check_series(r.dx, o.dx);
    check_series(r.adx, o.adx);
  }

  TEST_CASE("bounded oscillators stay in [0, 100] under fuzzing") {
    std::mt19937_64 rng(6);
    IndicatorConfig cfg;
    std::size_t violations = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      auto s = testsupport::random_series(60, rng, rep % 3 == 0 ? 0.5 : 0.0);
      auto osc = oscillators(s, cfg);
      auto a = trend_adx(s, cfg.adx).adx;
      for (const auto* v : {&osc.rsi, &osc.stochastic, &osc.mfi, &a}) {
        for (double x : *v) {
          if (!std::isnan(x) && (x < 0 || x > 100)) ++violations;
        }
      }
    }
    CHECK(violations == 0);
  }

  TEST_CASE("zero-movement windows use the neutral value") {
    PriceSeries s;
    for (int t = 0; t < 30; ++t) {
      s.open.push_back(10);
      s.high.push_back(10);
      s.low.push_back(10);
      s.close.push_back(10);
      s.volume.push_back(0);
    }
    CHECK(rsi(s.close, 14)[20] == 50);
    CHECK(stochastic(s, 14)[20] == 50);
    CHECK(mfi(s, 14)[20] == 50);
    CHECK(trend_adx(s, 5).adx[20] == 0);
  }

  TEST_CASE("feature assembly layout") {
    IndicatorConfig cfg;
    auto spec = feature_spec(cfg);
    CHECK(spec.channels.front() == "open");
    CHECK(spec.bounded[spec.index_of("rsi_14")]);
    CHECK_FALSE(spec.bounded[spec.index_of("macd_12_26")]);
    cfg.enabled = {Indicator::Rsi};
    CHECK(feature_spec(cfg).channels.size() == 1);
    CHECK(parse_indicator("bollinger") == Indicator::Bollinger);
    CHECK_THROWS_AS(parse_indicator("nope"), Error);
    cfg.macd_short = 30;
    CHECK_THROWS_AS(cfg.validate(), Error);
  }
}
