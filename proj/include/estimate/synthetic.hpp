#pragma once

// Deterministic synthetic markets for the bundled dataset and tests.

#include <cstdint>

#include "estimate/market_data.hpp"

namespace estimate::synthetic {

/// Mon-Fri trading days starting at `start` (moved forward to a weekday).
std::vector<market::Date> business_days(market::Date start, std::size_t count);

struct MarketConfig {
  std::size_t stocks = 30;
  std::size_t days = 756;
  std::size_t industries = 6;
  std::uint64_t seed = 2017;
  market::Date start{std::chrono::year{2017}, std::chrono::month{1}, std::chrono::day{3}};
  double missing_cap_fraction = 0.1;  // stocks published without a market cap
  std::size_t dropped_rows = 6;       // rows removed to exercise gap filling
};

/// Industry factor model with a lagged follower pair and mild short-term
/// reversal. Metadata (industry, market cap) is attached.
market::OhlcvPanel synthetic_market(const MarketConfig& cfg = {});

struct LearnabilityConfig {
  std::size_t stocks = 20;
  std::size_t days = 260;
  std::size_t warmup = 40;  // random-walk days before the rule takes over
  std::size_t horizon = 5;
  std::size_t rsi_window = 14;
  double intercept = 0.01;
  double slope = -0.1;
  std::uint64_t seed = 11;
};

/// Closes follow c[t + h] = c[t] * (1 + intercept + slope * (RSI_t - 50) / 100)
/// once t >= warmup, so the h-day relative change is an exact linear
/// function of RSI.
market::OhlcvPanel learnability_panel(const LearnabilityConfig& cfg = {});

/// Same date calendar for every stock, flat synthetic prices; for calendar tests.
market::OhlcvPanel flat_panel(std::size_t stocks, std::size_t days);

}  // namespace estimate::synthetic
