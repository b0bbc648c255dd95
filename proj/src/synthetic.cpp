#include "estimate/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "estimate/error.hpp"
#include "estimate/indicators.hpp"

namespace estimate::synthetic {

using std::chrono::sys_days;
using std::chrono::weekday;

std::vector<market::Date> business_days(market::Date start, std::size_t count) {
  std::vector<market::Date> out;
  out.reserve(count);
  sys_days d{start};
  while (out.size() < count) {
    const weekday wd{d};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) out.emplace_back(d);
    d += std::chrono::days{1};
  }
  return out;
}

namespace {

market::OhlcvBar bar_from(market::Date date, double prev_close, double close, double volume, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double open = prev_close * std::exp(0.002 * n01(rng));
  const double hi = std::max(open, close) * (1.0 + 0.004 * std::abs(n01(rng)));
  const double lo = std::min(open, close) * (1.0 - 0.004 * std::abs(n01(rng)));
  return {date, open, hi, lo, close, volume};
}

}  // namespace

market::OhlcvPanel synthetic_market(const MarketConfig& cfg) {
  if (cfg.stocks < 2 || cfg.days < 2 || cfg.industries == 0) {
    throw Error(ErrorCode::InvalidArgument, "synthetic market needs >= 2 stocks, >= 2 days, >= 1 industry");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto calendar = business_days(cfg.start, cfg.days);

  const std::size_t n = cfg.stocks;
  std::vector<std::size_t> industry(n);
  std::vector<double> loading(n), idio(n), price(n), base_volume(n);
  for (std::size_t s = 0; s < n; ++s) {
    industry[s] = s % cfg.industries;
    loading[s] = 0.6 + 0.6 * unif(rng);
    idio[s] = 0.006 + 0.01 * unif(rng);
    price[s] = 20.0 + 180.0 * unif(rng);
    base_volume[s] = std::exp(13.0 + 1.5 * n01(rng));
  }
  // The last stock echoes the first one's idiosyncratic shock two days later.
  const std::size_t leader = 0, follower = n - 1;
  std::vector<double> leader_shock(cfg.days, 0.0);

  std::map<std::string, std::vector<market::OhlcvBar>> rows;
  std::vector<std::string> symbols(n);
  for (std::size_t s = 0; s < n; ++s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%03zu", s + 1);
    symbols[s] = buf;
  }
  std::vector<std::vector<double>> returns(n, std::vector<double>(cfg.days, 0.0));
  for (std::size_t t = 0; t < cfg.days; ++t) {
    const double market = 0.0003 + 0.008 * n01(rng);
    std::vector<double> sector(cfg.industries);
    for (auto& f : sector) f = 0.009 * n01(rng);
    for (std::size_t s = 0; s < n; ++s) {
      double past = 0.0;
      for (std::size_t k = 1; k <= 5 && k <= t; ++k) past += returns[s][t - k];
      const double shock = idio[s] * n01(rng);
      if (s == leader) leader_shock[t] = shock;
      double r = market + loading[s] * sector[industry[s]] + shock - 0.06 * past;
      if (s == follower && t >= 2) r += 1.5 * leader_shock[t - 2];
      r = std::clamp(r, -0.25, 0.25);
      returns[s][t] = r;
      const double prev = price[s];
      price[s] = prev * (1.0 + r);
      const double volume = std::round(base_volume[s] * std::exp(0.3 * n01(rng) + 8.0 * std::abs(r)));
      rows[symbols[s]].push_back(bar_from(calendar[t], prev, price[s], volume, rng));
    }
  }
  // Remove a few interior rows; the loader forward-fills them.
  for (std::size_t k = 0; k < cfg.dropped_rows; ++k) {
    auto& series = rows[symbols[1 + k % (n - 1)]];
    const auto idx = 1 + static_cast<std::size_t>(unif(rng) * static_cast<double>(series.size() - 2));
    series.erase(series.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  auto panel = market::panel_from_bars(std::move(rows));
  std::map<std::string, market::SymbolMeta> meta;
  static const char* kIndustries[] = {"Technology", "Financials", "Health Care", "Energy",
                                      "Industrials", "Consumer", "Utilities", "Materials"};
  for (std::size_t s = 0; s < n; ++s) {
    market::SymbolMeta m;
    m.industry = industry[s] < 8 ? kIndustries[industry[s]] : "Industry" + std::to_string(industry[s]);
    if (unif(rng) >= cfg.missing_cap_fraction) m.market_cap = std::round(std::exp(23.0 + 1.2 * n01(rng)));
    meta[symbols[s]] = m;
  }
  market::attach_metadata(panel, meta);
  return panel;
}

market::OhlcvPanel learnability_panel(const LearnabilityConfig& cfg) {
  if (cfg.warmup < cfg.rsi_window + 1 || cfg.days <= cfg.warmup + cfg.horizon) {
    throw Error(ErrorCode::InvalidArgument, "learnability panel: warmup or length too short");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const auto calendar = business_days({std::chrono::year{2020}, std::chrono::month{1}, std::chrono::day{2}}, cfg.days);
  std::map<std::string, std::vector<market::OhlcvBar>> rows;
  std::map<std::string, market::SymbolMeta> meta;
  for (std::size_t s = 0; s < cfg.stocks; ++s) {
    std::vector<double> c(cfg.days);
    c[0] = 50.0 + 50.0 * std::abs(n01(rng));
    const std::size_t head = cfg.warmup + cfg.horizon;
    for (std::size_t t = 1; t < head; ++t) c[t] = c[t - 1] * (1.0 + 0.02 * n01(rng));
    for (std::size_t t = cfg.warmup; t + cfg.horizon < cfg.days; ++t) {
      const auto rsi = indicators::rsi(std::span<const double>(c.data(), t + 1), cfg.rsi_window);
      const double change = cfg.intercept + cfg.slope * (rsi[t] - 50.0) / 100.0;
      c[t + cfg.horizon] = c[t] * (1.0 + change);
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "L%02zu", s + 1);
    auto& series = rows[buf];
    for (std::size_t t = 0; t < cfg.days; ++t) {
      const double prev = t ? c[t - 1] : c[0];
      series.push_back(bar_from(calendar[t], prev, c[t], 1e6 * (1.0 + 0.2 * std::abs(n01(rng))), rng));
    }
    meta[buf] = {"Industry" + std::to_string(s % 4), std::nullopt};
  }
  auto panel = market::panel_from_bars(std::move(rows));
  market::attach_metadata(panel, meta);
  return panel;
}

market::OhlcvPanel flat_panel(std::size_t stocks, std::size_t days) {
  const auto calendar = business_days({std::chrono::year{2010}, std::chrono::month{1}, std::chrono::day{4}}, days);
  std::map<std::string, std::vector<market::OhlcvBar>> rows;
  for (std::size_t s = 0; s < stocks; ++s) {
    auto& series = rows["F" + std::to_string(s)];
    for (const auto& d : calendar) series.push_back({d, 10.0, 10.0, 10.0, 10.0, 100.0});
  }
  return market::panel_from_bars(std::move(rows));
}

}  // namespace estimate::synthetic
