#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace estimate::market {

using Date = std::chrono::year_month_day;

Date parse_date(const std::string& iso);
std::string format_date(const Date& d);

struct OhlcvBar {
  Date date{};
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;
};

struct SymbolMeta {
  std::string industry;
  std::optional<double> market_cap;
};

struct LoadWarning {
  std::string symbol;
  std::string reason;
};

/// Per-symbol OHLCV series aligned to one shared trading calendar.
struct OhlcvPanel {
  std::vector<std::string> symbols;
  std::vector<Date> calendar;
  std::vector<std::vector<OhlcvBar>> bars;  // bars[stock][day]
  std::vector<SymbolMeta> meta;             // empty until metadata is attached
  std::vector<LoadWarning> warnings;

  std::size_t stocks() const { return symbols.size(); }
  std::size_t days() const { return calendar.size(); }
  const OhlcvBar& bar(std::size_t stock, std::size_t day) const { return bars[stock][day]; }
  double close(std::size_t stock, std::size_t day) const { return bars[stock][day].close; }
  std::optional<std::size_t> symbol_index(const std::string& symbol) const;
};

/// Reads `date,symbol,open,high,low,close,volume` (any column order, extra
/// columns ignored). Missing interior days are forward-filled with a flat bar
/// at the previous close and zero volume; symbols missing more than 20% of
/// the calendar are dropped with a warning.
OhlcvPanel load_ohlcv(const std::filesystem::path& path,
                      const std::optional<std::vector<std::string>>& universe = std::nullopt);

/// Same parsing rules over in-memory rows (used by load_ohlcv and tests).
OhlcvPanel panel_from_bars(std::map<std::string, std::vector<OhlcvBar>> rows,
                           double max_missing_fraction = 0.2);

/// Reads `symbol,industry,market_cap`; an empty market_cap cell means unknown.
std::map<std::string, SymbolMeta> load_metadata(const std::filesystem::path& path);

/// Fills panel.meta in symbol order. Symbols without a metadata row get
/// industry "unknown".
void attach_metadata(OhlcvPanel& panel, const std::map<std::string, SymbolMeta>& meta);

void write_ohlcv(const std::filesystem::path& path, const OhlcvPanel& panel);
void write_metadata(const std::filesystem::path& path, const OhlcvPanel& panel);

/// Relative close-to-close change over `lookahead` trading days.
struct LabelTensor {
  std::size_t stocks = 0;
  std::size_t days = 0;
  std::size_t lookahead = 0;
  std::vector<double> values;  // stock-major; NaN where t + lookahead is past the calendar

  double at(std::size_t stock, std::size_t day) const { return values[stock * days + day]; }
  bool defined(std::size_t day) const { return day + lookahead < days; }
};

LabelTensor compute_labels(const OhlcvPanel& panel, std::size_t lookahead = 5);

struct DayRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t day) const { return day >= begin && day < end; }
};

struct PhaseSplit {
  int phase_id = 0;
  DayRange train;
  DayRange valid;
  DayRange test;
};

enum class PhaseUnit {
  TradingDays,   // months = days_per_month trading days, stride in trading days
  CalendarDates  // months and stride measured on the date axis
};

struct PhaseConfig {
  double train_months = 10;
  double valid_months = 2;
  double test_months = 6;
  double days_per_month = 21;
  std::size_t stride_days = 163;
  PhaseUnit unit = PhaseUnit::TradingDays;
};

/// Rolling train/valid/test layout in trading-day units; phases overrunning
/// the calendar are dropped.
std::vector<PhaseSplit> make_rolling_phases(std::size_t calendar_days, const PhaseConfig& cfg = {});

/// Layout for either unit. With CalendarDates, phase k is anchored
/// stride_days * k calendar days after the first date, each range starts at
/// the first trading day on or after its boundary date, whole months are
/// calendar months, and the last test range may end early at the end of the
/// data (phases whose test range would be empty are dropped).
std::vector<PhaseSplit> make_rolling_phases(const std::vector<Date>& calendar, const PhaseConfig& cfg = {});

/// stocks x days x channels, NaN marking missing values.
struct FeatureTensor {
  std::size_t stocks = 0;
  std::size_t days = 0;
  std::size_t channels = 0;
  std::vector<std::string> channel_names;
  std::vector<double> values;

  double& at(std::size_t s, std::size_t t, std::size_t c) { return values[(s * days + t) * channels + c]; }
  double at(std::size_t s, std::size_t t, std::size_t c) const {
    return values[(s * days + t) * channels + c];
  }
  /// True when every stock has every channel defined on `day`.
  bool day_complete(std::size_t day) const;
};

/// Causal trailing z-score per stock and channel over `window` days ending at
/// the current day (population std); std < 1e-12 maps to 0. Channels listed in
/// `passthrough` keep their input value. Any NaN inside the window yields NaN.
FeatureTensor normalize_features(const FeatureTensor& raw, std::size_t window,
                                 const std::vector<std::size_t>& passthrough = {});

}  // namespace estimate::market
