#pragma once

// Technical indicators over daily OHLCV series. Every series output has the
// input's length; NaN marks warm-up days where the indicator is undefined.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "estimate/market_data.hpp"

namespace estimate::indicators {

enum class Indicator {
  Raw,
  ArithmeticRatio,
  CloseRatio,
  CloseSma,
  CloseEma,
  VolumeSma,
  VolumeEma,
  Adx,
  Rsi,
  Macd,
  Stochastic,
  Mfi,
  Atr,
  Bollinger,
  Obv,
};

const std::vector<Indicator>& all_indicators();
const char* to_string(Indicator ind);
Indicator parse_indicator(const std::string& name);

struct IndicatorConfig {
  std::vector<std::size_t> ma_windows{5, 10, 20};
  std::vector<std::size_t> ratio_windows{5, 10, 20};
  std::size_t rsi = 14;
  std::size_t adx = 14;
  std::size_t atr = 14;
  std::size_t stochastic = 14;
  std::size_t mfi = 14;
  std::size_t bollinger = 20;
  double bollinger_m = 2.0;
  std::size_t macd_short = 12;
  std::size_t macd_long = 26;
  std::vector<Indicator> enabled = all_indicators();

  void validate() const;
  bool uses(Indicator ind) const;
};

struct PriceSeries {
  std::vector<double> open, high, low, close, volume;
  std::size_t size() const { return close.size(); }
};

PriceSeries series_of(const market::OhlcvPanel& panel, std::size_t stock);

// ---- moving averages ----

std::vector<double> sma(std::span<const double> values, std::size_t n);
// Seeded with the first value; k = 2 / (n + 1).
std::vector<double> ema(std::span<const double> values, std::size_t n);

struct MovingAverages {
  std::vector<double> sma;
  std::vector<double> ema;
};
MovingAverages moving_averages(std::span<const double> values, std::size_t n);

// ---- price ratios ----

struct PriceRatios {
  double ar_open = 0, ar_high = 0, ar_low = 0;
  double rc_min = 0, rc_max = 0;
};
// `closes` is the trailing window ending at (and including) bar.close.
PriceRatios price_ratios(const market::OhlcvBar& bar, std::span<const double> closes);

// ---- oscillators ----

std::vector<double> rsi(std::span<const double> close, std::size_t n);
std::vector<double> macd(std::span<const double> close, std::size_t short_n, std::size_t long_n);
std::vector<double> stochastic(const PriceSeries& s, std::size_t n);
std::vector<double> mfi(const PriceSeries& s, std::size_t n);

struct Oscillators {
  std::vector<double> rsi, macd, stochastic, mfi;
};
Oscillators oscillators(const PriceSeries& s, const IndicatorConfig& cfg);

// ---- trend ----

struct AdxSeries {
  std::vector<double> plus_dm, minus_dm;            // gated directional movement
  std::vector<double> smooth_plus, smooth_minus;    // Wilder-smoothed sums
  std::vector<double> plus_di, minus_di;            // relative to ATR, x100
  std::vector<double> dx, adx;
};
AdxSeries trend_adx(const PriceSeries& s, std::size_t n);

// ---- volatility / volume ----

std::vector<double> true_range(const PriceSeries& s);
std::vector<double> atr(const PriceSeries& s, std::size_t n);
struct Bands {
  std::vector<double> middle, upper, lower;
};
Bands bollinger(const PriceSeries& s, std::size_t n, double m);
std::vector<double> obv(const PriceSeries& s);

struct VolatilityBlock {
  std::vector<double> atr, bolu, bold, obv;
};
VolatilityBlock volatility_block(const PriceSeries& s, const IndicatorConfig& cfg);

// ---- feature assembly ----

struct FeatureVectorSpec {
  std::vector<std::string> channels;
  // Channels with a fixed [0, 100] range.
  std::vector<bool> bounded;
  std::size_t index_of(const std::string& name) const;
};

/// Raw feature tensor for the whole panel plus the channel layout. Days where
/// any channel is still warming up hold NaN for that channel.
struct AssembledFeatures {
  market::FeatureTensor raw;
  FeatureVectorSpec spec;
};

FeatureVectorSpec feature_spec(const IndicatorConfig& cfg);
AssembledFeatures assemble_features(const market::OhlcvPanel& panel, const IndicatorConfig& cfg = {});

/// Model-ready inputs: bounded oscillators mapped to (x - 50) / 50, every
/// other channel z-scored over a trailing window.
market::FeatureTensor model_inputs(const AssembledFeatures& features, std::size_t window);

}  // namespace estimate::indicators
