#include "estimate/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "estimate/error.hpp"

namespace estimate::indicators {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> nan_series(std::size_t n) { return std::vector<double>(n, kNaN); }

double ratio_to_rsi(double gain, double loss) {
  if (loss == 0.0) return gain == 0.0 ? 50.0 : 100.0;
  if (gain == 0.0) return 0.0;
  return 100.0 - 100.0 / (1.0 + gain / loss);
}

}  // namespace

const std::vector<Indicator>& all_indicators() {
  static const std::vector<Indicator> all{
      Indicator::Raw,       Indicator::ArithmeticRatio, Indicator::CloseRatio, Indicator::CloseSma,
      Indicator::CloseEma,  Indicator::VolumeSma,       Indicator::VolumeEma,  Indicator::Adx,
      Indicator::Rsi,       Indicator::Macd,            Indicator::Stochastic, Indicator::Mfi,
      Indicator::Atr,       Indicator::Bollinger,       Indicator::Obv};
  return all;
}

namespace {
constexpr const char* kIndicatorNames[] = {"raw",  "ar",   "rc",   "close_sma",  "close_ema", "volume_sma",
                                           "volume_ema", "adx", "rsi", "macd", "stochastic", "mfi",
                                           "atr",  "bollinger", "obv"};
}  // namespace

const char* to_string(Indicator ind) { return kIndicatorNames[static_cast<int>(ind)]; }

Indicator parse_indicator(const std::string& name) {
  for (Indicator ind : all_indicators()) {
    if (name == to_string(ind)) return ind;
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown indicator '" + name + "'");
}

void IndicatorConfig::validate() const {
  auto positive = [](std::size_t n, const char* what) {
    if (n < 1) throw Error(ErrorCode::ConfigInvalid, std::string(what) + " window must be >= 1");
  };
  for (auto n : ma_windows) positive(n, "moving-average");
  for (auto n : ratio_windows) positive(n, "close-ratio");
  positive(rsi, "RSI");
  positive(adx, "ADX");
  positive(atr, "ATR");
  positive(stochastic, "stochastic");
  positive(mfi, "MFI");
  positive(bollinger, "Bollinger");
  positive(macd_short, "MACD short");
  if (macd_short >= macd_long) throw Error(ErrorCode::ConfigInvalid, "MACD short period must be < long period");
}

bool IndicatorConfig::uses(Indicator ind) const {
  return std::find(enabled.begin(), enabled.end(), ind) != enabled.end();
}

PriceSeries series_of(const market::OhlcvPanel& panel, std::size_t stock) {
  PriceSeries s;
  const std::size_t n = panel.days();
  s.open.resize(n);
  s.high.resize(n);
  s.low.resize(n);
  s.close.resize(n);
  s.volume.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& b = panel.bar(stock, t);
    s.open[t] = b.open;
    s.high[t] = b.high;
    s.low[t] = b.low;
    s.close[t] = b.close;
    s.volume[t] = b.volume;
  }
  return s;
}

std::vector<double> sma(std::span<const double> values, std::size_t n) {
  auto out = nan_series(values.size());
  for (std::size_t t = n - 1; t < values.size(); ++t) {
    double acc = 0.0;
    for (std::size_t k = t + 1 - n; k <= t; ++k) acc += values[k];
    out[t] = acc / static_cast<double>(n);
  }
  return out;
}

std::vector<double> ema(std::span<const double> values, std::size_t n) {
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  const double k = 2.0 / (static_cast<double>(n) + 1.0);
  out[0] = values[0];
  for (std::size_t t = 1; t < values.size(); ++t) out[t] = values[t] * k + out[t - 1] * (1.0 - k);
  return out;
}

MovingAverages moving_averages(std::span<const double> values, std::size_t n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
  return {sma(values, n), ema(values, n)};
}

PriceRatios price_ratios(const market::OhlcvBar& bar, std::span<const double> closes) {
  if (bar.close <= 0.0) throw Error(ErrorCode::ZeroPrice, "close must be positive");
  if (closes.empty()) throw Error(ErrorCode::InvalidArgument, "close window is empty");
  const auto [lo, hi] = std::minmax_element(closes.begin(), closes.end());
  if (*lo <= 0.0) throw Error(ErrorCode::ZeroPrice, "close window contains a non-positive price");
  return {bar.open / bar.close, bar.high / bar.close, bar.low / bar.close, bar.close / *lo, bar.close / *hi};
}

std::vector<double> rsi(std::span<const double> close, std::size_t n) {
  auto out = nan_series(close.size());
  if (close.size() <= n) return out;
  double avg_gain = 0.0, avg_loss = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    const double d = close[t] - close[t - 1];
    avg_gain += d > 0 ? d : 0.0;
    avg_loss += d > 0 ? 0.0 : -d;
  }
  avg_gain /= static_cast<double>(n);
  avg_loss /= static_cast<double>(n);
  out[n] = ratio_to_rsi(avg_gain, avg_loss);
  const double nn = static_cast<double>(n);
  for (std::size_t t = n + 1; t < close.size(); ++t) {
    const double d = close[t] - close[t - 1];
    avg_gain = ((nn - 1.0) * avg_gain + (d > 0 ? d : 0.0)) / nn;
    avg_loss = ((nn - 1.0) * avg_loss + (d > 0 ? 0.0 : -d)) / nn;
    out[t] = ratio_to_rsi(avg_gain, avg_loss);
  }
  return out;
}

std::vector<double> macd(std::span<const double> close, std::size_t short_n, std::size_t long_n) {
  auto fast = ema(close, short_n);
  auto slow = ema(close, long_n);
  for (std::size_t t = 0; t < fast.size(); ++t) fast[t] -= slow[t];
  return fast;
}

std::vector<double> stochastic(const PriceSeries& s, std::size_t n) {
  auto out = nan_series(s.size());
  for (std::size_t t = n - 1; t < s.size(); ++t) {
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t k = t + 1 - n; k <= t; ++k) {
      hi = std::max(hi, s.high[k]);
      lo = std::min(lo, s.low[k]);
    }
    out[t] = hi == lo ? 50.0 : std::clamp(100.0 * (s.close[t] - lo) / (hi - lo), 0.0, 100.0);
  }
  return out;
}

std::vector<double> mfi(const PriceSeries& s, std::size_t n) {
  auto out = nan_series(s.size());
  std::vector<double> pos(s.size(), 0.0), negf(s.size(), 0.0);
  for (std::size_t t = 1; t < s.size(); ++t) {
    const double tp = (s.high[t] + s.low[t] + s.close[t]) / 3.0;
    const double prev = (s.high[t - 1] + s.low[t - 1] + s.close[t - 1]) / 3.0;
    (tp > prev ? pos[t] : negf[t]) = tp * s.volume[t];
  }
  for (std::size_t t = n; t < s.size(); ++t) {
    double p = 0.0, q = 0.0;
    for (std::size_t k = t + 1 - n; k <= t; ++k) {
      p += pos[k];
      q += negf[k];
    }
    if (q == 0.0) {
      out[t] = p == 0.0 ? 50.0 : 100.0;
    } else {
      out[t] = 100.0 - 100.0 / (1.0 + p / q);
    }
  }
  return out;
}

Oscillators oscillators(const PriceSeries& s, const IndicatorConfig& cfg) {
  return {rsi(s.close, cfg.rsi), macd(s.close, cfg.macd_short, cfg.macd_long), stochastic(s, cfg.stochastic),
          mfi(s, cfg.mfi)};
}

std::vector<double> true_range(const PriceSeries& s) {
  std::vector<double> tr(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    tr[t] = s.high[t] - s.low[t];
    if (t > 0) {
      tr[t] = std::max({tr[t], std::abs(s.high[t] - s.close[t - 1]), std::abs(s.low[t] - s.close[t - 1])});
    }
  }
  return tr;
}

std::vector<double> atr(const PriceSeries& s, std::size_t n) {
  auto out = nan_series(s.size());
  const auto tr = true_range(s);
  // True ranges from t = 1 onward use the previous close.
  for (std::size_t t = n; t < s.size(); ++t) {
    double acc = 0.0;
    for (std::size_t k = t + 1 - n; k <= t; ++k) acc += tr[k];
    out[t] = acc / static_cast<double>(n);
  }
  return out;
}

AdxSeries trend_adx(const PriceSeries& s, std::size_t n) {
  const std::size_t len = s.size();
  AdxSeries r;
  r.plus_dm.assign(len, 0.0);
  r.minus_dm.assign(len, 0.0);
  r.smooth_plus = nan_series(len);
  r.smooth_minus = nan_series(len);
  r.plus_di = nan_series(len);
  r.minus_di = nan_series(len);
  r.dx = nan_series(len);
  r.adx = nan_series(len);
  for (std::size_t t = 1; t < len; ++t) {
    const double up = s.high[t] - s.high[t - 1];
    const double down = s.low[t - 1] - s.low[t];
    r.plus_dm[t] = up > down && up > 0 ? up : 0.0;
    r.minus_dm[t] = down > up && down > 0 ? down : 0.0;
  }
  if (len <= n) return r;

  const auto range = atr(s, n);
  const double nn = static_cast<double>(n);
  double sp = 0.0, sm = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    sp += r.plus_dm[t];
    sm += r.minus_dm[t];
  }
  for (std::size_t t = n; t < len; ++t) {
    if (t > n) {
      sp = sp - sp / nn + r.plus_dm[t];
      sm = sm - sm / nn + r.minus_dm[t];
    }
    r.smooth_plus[t] = sp;
    r.smooth_minus[t] = sm;
    if (range[t] > 0) {
      r.plus_di[t] = sp / range[t] * 100.0;
      r.minus_di[t] = sm / range[t] * 100.0;
    }
    // The ATR scale cancels in DX, so it is formed from the smoothed sums.
    r.dx[t] = sp + sm == 0.0 ? 0.0 : 100.0 * std::abs(sp - sm) / (sp + sm);
  }
  const std::size_t seed = 2 * n - 1;
  if (seed >= len) return r;
  double adx = 0.0;
  for (std::size_t t = n; t <= seed; ++t) adx += r.dx[t];
  adx /= nn;
  r.adx[seed] = adx;
  for (std::size_t t = seed + 1; t < len; ++t) {
    adx = (adx * (nn - 1.0) + r.dx[t]) / nn;
    r.adx[t] = adx;
  }
  return r;
}

Bands bollinger(const PriceSeries& s, std::size_t n, double m) {
  Bands b{nan_series(s.size()), nan_series(s.size()), nan_series(s.size())};
  std::vector<double> tp(s.size());
  for (std::size_t t = 0; t < s.size(); ++t) tp[t] = (s.high[t] + s.low[t] + s.close[t]) / 3.0;
  for (std::size_t t = n - 1; t < s.size(); ++t) {
    double mean = 0.0;
    for (std::size_t k = t + 1 - n; k <= t; ++k) mean += tp[k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t k = t + 1 - n; k <= t; ++k) var += (tp[k] - mean) * (tp[k] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    b.middle[t] = mean;
    b.upper[t] = mean + m * sd;
    b.lower[t] = mean - m * sd;
  }
  return b;
}

std::vector<double> obv(const PriceSeries& s) {
  std::vector<double> out(s.size(), 0.0);
  for (std::size_t t = 1; t < s.size(); ++t) {
    double step = 0.0;
    if (s.close[t] > s.close[t - 1]) step = s.volume[t];
    if (s.close[t] < s.close[t - 1]) step = -s.volume[t];
    out[t] = out[t - 1] + step;
  }
  return out;
}

VolatilityBlock volatility_block(const PriceSeries& s, const IndicatorConfig& cfg) {
  auto bands = bollinger(s, cfg.bollinger, cfg.bollinger_m);
  return {atr(s, cfg.atr), std::move(bands.upper), std::move(bands.lower), obv(s)};
}

// ---- assembly ----

std::size_t FeatureVectorSpec::index_of(const std::string& name) const {
  auto it = std::find(channels.begin(), channels.end(), name);
  if (it == channels.end()) throw Error(ErrorCode::InvalidArgument, "no feature channel " + name);
  return static_cast<std::size_t>(it - channels.begin());
}

namespace {

// Walks the enabled indicators in canonical order, calling emit(name, bounded, series).
template <typename Emit>
void for_each_channel(const PriceSeries* s, const IndicatorConfig& cfg, Emit&& emit) {
  const auto n = s ? s->size() : 0;
  auto empty = [&] { return std::vector<double>{}; };
  for (Indicator ind : all_indicators()) {
    if (!cfg.uses(ind)) continue;
    const auto ns = [](std::size_t v) { return std::to_string(v); };
    switch (ind) {
      case Indicator::Raw:
        emit("open", false, s ? s->open : empty());
        emit("high", false, s ? s->high : empty());
        emit("low", false, s ? s->low : empty());
        emit("close", false, s ? s->close : empty());
        emit("volume", false, s ? s->volume : empty());
        break;
      case Indicator::ArithmeticRatio: {
        std::vector<double> o, h, l;
        if (s) {
          o.resize(n);
          h.resize(n);
          l.resize(n);
          for (std::size_t t = 0; t < n; ++t) {
            o[t] = s->open[t] / s->close[t];
            h[t] = s->high[t] / s->close[t];
            l[t] = s->low[t] / s->close[t];
          }
        }
        emit("ar_open", false, o);
        emit("ar_high", false, h);
        emit("ar_low", false, l);
        break;
      }
      case Indicator::CloseRatio:
        for (auto w : cfg.ratio_windows) {
          std::vector<double> lo, hi;
          if (s) {
            lo = nan_series(n);
            hi = nan_series(n);
            for (std::size_t t = w - 1; t < n; ++t) {
              market::OhlcvBar bar{{}, s->open[t], s->high[t], s->low[t], s->close[t], s->volume[t]};
              auto r = price_ratios(bar, std::span<const double>(s->close).subspan(t + 1 - w, w));
              lo[t] = r.rc_min;
              hi[t] = r.rc_max;
            }
          }
          emit("rc_min_" + ns(w), false, lo);
          emit("rc_max_" + ns(w), false, hi);
        }
        break;
      case Indicator::CloseSma:
        for (auto w : cfg.ma_windows) emit("close_sma_" + ns(w), false, s ? sma(s->close, w) : empty());
        break;
      case Indicator::CloseEma:
        for (auto w : cfg.ma_windows) emit("close_ema_" + ns(w), false, s ? ema(s->close, w) : empty());
        break;
      case Indicator::VolumeSma:
        for (auto w : cfg.ma_windows) emit("volume_sma_" + ns(w), false, s ? sma(s->volume, w) : empty());
        break;
      case Indicator::VolumeEma:
        for (auto w : cfg.ma_windows) emit("volume_ema_" + ns(w), false, s ? ema(s->volume, w) : empty());
        break;
      case Indicator::Adx:
        emit("adx_" + ns(cfg.adx), true, s ? trend_adx(*s, cfg.adx).adx : empty());
        break;
      case Indicator::Rsi:
        emit("rsi_" + ns(cfg.rsi), true, s ? rsi(s->close, cfg.rsi) : empty());
        break;
      case Indicator::Macd:
        emit("macd_" + ns(cfg.macd_short) + "_" + ns(cfg.macd_long), false,
             s ? macd(s->close, cfg.macd_short, cfg.macd_long) : empty());
        break;
      case Indicator::Stochastic:
        emit("stoch_" + ns(cfg.stochastic), true, s ? stochastic(*s, cfg.stochastic) : empty());
        break;
      case Indicator::Mfi:
        emit("mfi_" + ns(cfg.mfi), true, s ? mfi(*s, cfg.mfi) : empty());
        break;
      case Indicator::Atr:
        emit("atr_" + ns(cfg.atr), false, s ? atr(*s, cfg.atr) : empty());
        break;
      case Indicator::Bollinger: {
        Bands b;
        if (s) b = bollinger(*s, cfg.bollinger, cfg.bollinger_m);
        emit("bolu_" + ns(cfg.bollinger), false, b.upper);
        emit("bold_" + ns(cfg.bollinger), false, b.lower);
        break;
      }
      case Indicator::Obv:
        emit("obv", false, s ? obv(*s) : empty());
        break;
    }
  }
}

}  // namespace

FeatureVectorSpec feature_spec(const IndicatorConfig& cfg) {
  cfg.validate();
  FeatureVectorSpec spec;
  for_each_channel(nullptr, cfg, [&](const std::string& name, bool bounded, const std::vector<double>&) {
    spec.channels.push_back(name);
    spec.bounded.push_back(bounded);
  });
  return spec;
}

AssembledFeatures assemble_features(const market::OhlcvPanel& panel, const IndicatorConfig& cfg) {
  AssembledFeatures out;
  out.spec = feature_spec(cfg);
  auto& raw = out.raw;
  raw.stocks = panel.stocks();
  raw.days = panel.days();
  raw.channels = out.spec.channels.size();
  raw.channel_names = out.spec.channels;
  raw.values.assign(raw.stocks * raw.days * raw.channels, kNaN);
  for (std::size_t stock = 0; stock < raw.stocks; ++stock) {
    const auto s = series_of(panel, stock);
    std::size_t c = 0;
    for_each_channel(&s, cfg, [&](const std::string&, bool, const std::vector<double>& series) {
      for (std::size_t t = 0; t < raw.days; ++t) raw.at(stock, t, c) = series[t];
      ++c;
    });
  }
  bool any = false;
  for (std::size_t t = 0; t < raw.days && !any; ++t) any = raw.day_complete(t);
  if (!any) {
    throw Error(ErrorCode::CalendarTooShort, "no day has every indicator defined (" +
                                                 std::to_string(raw.days) + " days)");
  }
  return out;
}

market::FeatureTensor model_inputs(const AssembledFeatures& features, std::size_t window) {
  market::FeatureTensor scaled = features.raw;
  std::vector<std::size_t> bounded;
  for (std::size_t c = 0; c < scaled.channels; ++c) {
    if (!features.spec.bounded[c]) continue;
    bounded.push_back(c);
    for (std::size_t s = 0; s < scaled.stocks; ++s)
      for (std::size_t t = 0; t < scaled.days; ++t) {
        double& v = scaled.at(s, t, c);
        if (!std::isnan(v)) v = (v - 50.0) / 50.0;
      }
  }
  return market::normalize_features(scaled, window, bounded);
}

}  // namespace estimate::indicators
