#include "estimate/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "estimate/error.hpp"

namespace estimate::market {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::CorruptRow, "cannot parse number '" + s + "' in " + context);
  }
  return v;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

Date parse_date(const std::string& iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream is(iso);
  if (!(is >> y >> dash1 >> m >> dash2 >> d) || dash1 != '-' || dash2 != '-') {
    throw Error(ErrorCode::CorruptRow, "bad ISO date '" + iso + "'");
  }
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw Error(ErrorCode::CorruptRow, "invalid date '" + iso + "'");
  return date;
}

std::string format_date(const Date& d) {
  std::ostringstream os;
  os << std::setfill('0') << std::setw(4) << static_cast<int>(d.year()) << '-' << std::setw(2)
     << static_cast<unsigned>(d.month()) << '-' << std::setw(2) << static_cast<unsigned>(d.day());
  return os.str();
}

std::optional<std::size_t> OhlcvPanel::symbol_index(const std::string& symbol) const {
  auto it = std::find(symbols.begin(), symbols.end(), symbol);
  if (it == symbols.end()) return std::nullopt;
  return static_cast<std::size_t>(it - symbols.begin());
}

OhlcvPanel panel_from_bars(std::map<std::string, std::vector<OhlcvBar>> rows, double max_missing_fraction) {
  std::set<std::chrono::sys_days> all_days;
  for (auto& [symbol, series] : rows) {
    std::sort(series.begin(), series.end(), [](const OhlcvBar& a, const OhlcvBar& b) {
      return std::chrono::sys_days(a.date) < std::chrono::sys_days(b.date);
    });
    auto dup = std::adjacent_find(series.begin(), series.end(), [](const OhlcvBar& a, const OhlcvBar& b) {
      return a.date == b.date;
    });
    if (dup != series.end()) {
      throw Error(ErrorCode::CorruptRow, "duplicate bar for " + symbol + " on " + format_date(dup->date));
    }
    for (const auto& b : series) all_days.insert(std::chrono::sys_days(b.date));
  }

  OhlcvPanel panel;
  for (auto d : all_days) panel.calendar.emplace_back(d);
  const std::size_t days = panel.calendar.size();

  for (auto& [symbol, series] : rows) {
    const std::size_t missing = days - series.size();
    if (series.empty() || static_cast<double>(missing) > max_missing_fraction * static_cast<double>(days)) {
      panel.warnings.push_back({symbol, "missing " + std::to_string(missing) + " of " + std::to_string(days) +
                                            " days; excluded"});
      continue;
    }
    std::vector<OhlcvBar> aligned(days);
    std::size_t next = 0;
    for (std::size_t t = 0; t < days; ++t) {
      if (next < series.size() && series[next].date == panel.calendar[t]) {
        aligned[t] = series[next++];
        continue;
      }
      // Leading gaps take a flat bar at the first available open; later gaps
      // repeat the previous close.
      const double px = t == 0 || next == 0 ? series.front().open : aligned[t - 1].close;
      aligned[t] = OhlcvBar{panel.calendar[t], px, px, px, px, 0.0};
    }
    if (missing > 0) {
      panel.warnings.push_back({symbol, "forward-filled " + std::to_string(missing) + " days"});
    }
    panel.symbols.push_back(symbol);
    panel.bars.push_back(std::move(aligned));
  }
  if (panel.symbols.empty()) throw Error(ErrorCode::EmptyPanel, "no usable symbols");
  return panel;
}

OhlcvPanel load_ohlcv(const std::filesystem::path& path, const std::optional<std::vector<std::string>>& universe) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, path.string() + " has no header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_csv_line(line);
  const std::vector<std::string> required{"date", "symbol", "open", "high", "low", "close", "volume"};
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string h = header[i];
    std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });
    col[h] = i;
  }
  for (const auto& r : required) {
    if (!col.count(r)) throw Error(ErrorCode::MissingColumn, path.string() + " lacks column '" + r + "'");
  }
  std::set<std::string> keep;
  if (universe) keep.insert(universe->begin(), universe->end());

  std::map<std::string, std::vector<OhlcvBar>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string ctx = path.filename().string() + ":" + std::to_string(line_no);
    if (cells.size() < header.size()) throw Error(ErrorCode::CorruptRow, ctx + " has too few cells");
    const std::string& symbol = cells[col["symbol"]];
    if (universe && !keep.count(symbol)) continue;
    OhlcvBar bar;
    bar.date = parse_date(cells[col["date"]]);
    bar.open = parse_number(cells[col["open"]], ctx);
    bar.high = parse_number(cells[col["high"]], ctx);
    bar.low = parse_number(cells[col["low"]], ctx);
    bar.close = parse_number(cells[col["close"]], ctx);
    bar.volume = parse_number(cells[col["volume"]], ctx);
    if (!(bar.open > 0 && bar.high > 0 && bar.low > 0 && bar.close > 0)) {
      throw Error(ErrorCode::NonPositivePrice, ctx + " has a non-positive price");
    }
    if (!(bar.volume >= 0) || bar.low > std::min(bar.open, bar.close) || bar.high < std::max(bar.open, bar.close)) {
      throw Error(ErrorCode::CorruptRow, ctx + " violates low <= open,close <= high or volume >= 0");
    }
    rows[symbol].push_back(bar);
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyPanel, path.string() + " has no rows");
  return panel_from_bars(std::move(rows));
}

std::map<std::string, SymbolMeta> load_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, path.string() + " has no header");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* r : {"symbol", "industry", "market_cap"}) {
    if (!col.count(r)) throw Error(ErrorCode::MissingColumn, path.string() + " lacks column '" + r + "'");
  }
  std::map<std::string, SymbolMeta> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    cells.resize(std::max(cells.size(), header.size()));
    SymbolMeta m;
    m.industry = cells[col["industry"]];
    const auto& cap = cells[col["market_cap"]];
    if (!cap.empty()) {
      const double v = parse_number(cap, path.filename().string() + ":" + std::to_string(line_no));
      if (v > 0) m.market_cap = v;
    }
    out[cells[col["symbol"]]] = m;
  }
  return out;
}

void attach_metadata(OhlcvPanel& panel, const std::map<std::string, SymbolMeta>& meta) {
  panel.meta.clear();
  for (const auto& s : panel.symbols) {
    auto it = meta.find(s);
    if (it == meta.end()) {
      panel.meta.push_back({"unknown", std::nullopt});
      panel.warnings.push_back({s, "no metadata row; industry 'unknown'"});
    } else {
      panel.meta.push_back(it->second);
    }
  }
}

void write_ohlcv(const std::filesystem::path& path, const OhlcvPanel& panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "date,symbol,open,high,low,close,volume\n";
  for (std::size_t t = 0; t < panel.days(); ++t) {
    for (std::size_t s = 0; s < panel.stocks(); ++s) {
      const auto& b = panel.bar(s, t);
      out << format_date(b.date) << ',' << panel.symbols[s] << ',' << fmt_double(b.open) << ','
          << fmt_double(b.high) << ',' << fmt_double(b.low) << ',' << fmt_double(b.close) << ','
          << fmt_double(b.volume) << '\n';
    }
  }
}

void write_metadata(const std::filesystem::path& path, const OhlcvPanel& panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "symbol,industry,market_cap\n";
  for (std::size_t s = 0; s < panel.stocks(); ++s) {
    out << panel.symbols[s] << ',';
    if (s < panel.meta.size()) {
      out << panel.meta[s].industry << ',';
      if (panel.meta[s].market_cap) out << fmt_double(*panel.meta[s].market_cap);
    } else {
      out << "unknown,";
    }
    out << '\n';
  }
}

LabelTensor compute_labels(const OhlcvPanel& panel, std::size_t lookahead) {
  if (lookahead < 1) throw Error(ErrorCode::InvalidArgument, "lookahead must be >= 1");
  if (panel.stocks() == 0 || panel.days() == 0) throw Error(ErrorCode::EmptyPanel, "empty panel");
  LabelTensor labels;
  labels.stocks = panel.stocks();
  labels.days = panel.days();
  labels.lookahead = lookahead;
  labels.values.assign(labels.stocks * labels.days, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t s = 0; s < labels.stocks; ++s) {
    for (std::size_t t = 0; t + lookahead < labels.days; ++t) {
      const double c0 = panel.close(s, t);
      if (c0 == 0.0) {
        throw Error(ErrorCode::ZeroPrice, panel.symbols[s] + " has zero close on " + format_date(panel.calendar[t]));
      }
      labels.values[s * labels.days + t] = (panel.close(s, t + lookahead) - c0) / c0;
    }
  }
  return labels;
}

std::vector<PhaseSplit> make_rolling_phases(std::size_t calendar_days, const PhaseConfig& cfg) {
  const auto to_days = [&](double months) {
    return static_cast<std::size_t>(std::llround(months * cfg.days_per_month));
  };
  const std::size_t train = to_days(cfg.train_months);
  const std::size_t valid = to_days(cfg.valid_months);
  const std::size_t test = to_days(cfg.test_months);
  if (train == 0 || valid == 0 || test == 0 || cfg.stride_days == 0) {
    throw Error(ErrorCode::InvalidArgument, "phase durations and stride must be positive");
  }
  const std::size_t span = train + valid + test;
  if (calendar_days < span) {
    throw Error(ErrorCode::CalendarTooShort, "calendar of " + std::to_string(calendar_days) +
                                                 " days is shorter than one phase (" + std::to_string(span) + ")");
  }
  std::vector<PhaseSplit> phases;
  for (std::size_t start = 0; start + span <= calendar_days; start += cfg.stride_days) {
    PhaseSplit p;
    p.phase_id = static_cast<int>(phases.size()) + 1;
    p.train = {start, start + train};
    p.valid = {p.train.end, p.train.end + valid};
    p.test = {p.valid.end, p.valid.end + test};
    phases.push_back(p);
  }
  return phases;
}

std::vector<PhaseSplit> make_rolling_phases(const std::vector<Date>& calendar, const PhaseConfig& cfg) {
  if (cfg.unit == PhaseUnit::TradingDays) return make_rolling_phases(calendar.size(), cfg);
  using std::chrono::sys_days;
  const auto whole = [](double months, const char* what) {
    if (months <= 0 || months != std::floor(months)) {
      throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be a positive whole number of months");
    }
    return std::chrono::months{static_cast<int>(months)};
  };
  const auto train = whole(cfg.train_months, "train_months");
  const auto valid = whole(cfg.valid_months, "valid_months");
  const auto test = whole(cfg.test_months, "test_months");
  if (cfg.stride_days == 0) throw Error(ErrorCode::InvalidArgument, "stride must be positive");
  if (calendar.empty()) throw Error(ErrorCode::CalendarTooShort, "empty calendar");
  // First trading day on or after `d`.
  const auto index_at = [&](sys_days d) {
    const auto it = std::lower_bound(calendar.begin(), calendar.end(), d,
                                     [](const Date& a, sys_days b) { return sys_days{a} < b; });
    return static_cast<std::size_t>(it - calendar.begin());
  };
  const auto add_months = [](sys_days d, std::chrono::months m) {
    Date ymd{d};
    Date moved = ymd + m;
    if (!moved.ok()) moved = moved.year() / moved.month() / std::chrono::last;
    return sys_days{moved};
  };
  const sys_days origin{calendar.front()};
  std::vector<PhaseSplit> phases;
  for (std::size_t k = 0;; ++k) {
    const sys_days anchor = origin + std::chrono::days{static_cast<long>(cfg.stride_days * k)};
    PhaseSplit p;
    p.phase_id = static_cast<int>(k) + 1;
    p.train = {index_at(anchor), index_at(add_months(anchor, train))};
    p.valid = {p.train.end, index_at(add_months(anchor, train + valid))};
    p.test = {p.valid.end, index_at(add_months(anchor, train + valid + test))};
    if (p.test.begin >= calendar.size()) break;
    phases.push_back(p);
  }
  if (phases.empty()) {
    throw Error(ErrorCode::CalendarTooShort, "calendar of " + std::to_string(calendar.size()) +
                                                 " days holds no phase with a test range");
  }
  return phases;
}

bool FeatureTensor::day_complete(std::size_t day) const {
  for (std::size_t s = 0; s < stocks; ++s)
    for (std::size_t c = 0; c < channels; ++c)
      if (std::isnan(at(s, day, c))) return false;
  return true;
}

FeatureTensor normalize_features(const FeatureTensor& raw, std::size_t window,
                                 const std::vector<std::size_t>& passthrough) {
  if (window < 2) throw Error(ErrorCode::InvalidArgument, "normalization window must be >= 2");
  FeatureTensor out = raw;
  std::vector<bool> pass(raw.channels, false);
  for (auto c : passthrough) {
    if (c < raw.channels) pass[c] = true;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t s = 0; s < raw.stocks; ++s) {
    for (std::size_t c = 0; c < raw.channels; ++c) {
      if (pass[c]) continue;
      for (std::size_t t = 0; t < raw.days; ++t) {
        if (t + 1 < window) {
          out.at(s, t, c) = nan;
          continue;
        }
        double mean = 0.0;
        bool missing = false;
        for (std::size_t k = t + 1 - window; k <= t; ++k) {
          const double v = raw.at(s, k, c);
          if (std::isnan(v)) {
            missing = true;
            break;
          }
          mean += v;
        }
        if (missing) {
          out.at(s, t, c) = nan;
          continue;
        }
        mean /= static_cast<double>(window);
        double var = 0.0;
        for (std::size_t k = t + 1 - window; k <= t; ++k) {
          const double dv = raw.at(s, k, c) - mean;
          var += dv * dv;
        }
        const double sd = std::sqrt(var / static_cast<double>(window));
        out.at(s, t, c) = sd < 1e-12 ? 0.0 : (raw.at(s, t, c) - mean) / sd;
      }
    }
  }
  return out;
}

}  // namespace estimate::market
