#pragma once

// Prediction-quality metrics, the top-k portfolio simulator with trailing
// stop and take-profit exits, and the rolling per-phase report.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "estimate/market_data.hpp"

namespace estimate::backtest {

struct IcMetrics {
  double ic = 0.0;
  std::optional<double> icir;
  double rank_ic = 0.0;
  std::optional<double> rank_icir;
  std::size_t days_used = 0;
  std::vector<std::size_t> skipped_days;  // zero-variance cross-sections
};

double pearson(const std::vector<double>& a, const std::vector<double>& b);
/// Average ranks, ties sharing the mean of their positions (1-based).
std::vector<double> average_ranks(const std::vector<double>& v);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// pred[d] and actual[d] are the cross-sections of day d.
IcMetrics ic_metrics(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& actual);

/// Fraction of the N highest predictions whose actual change is positive;
/// prediction ties go to the lower index.
double prec_at_n(const std::vector<double>& pred, const std::vector<double>& actual, std::size_t n);

struct RiskConfig {
  double trailing_stop = 0.07;
  double take_profit = 0.20;
  std::size_t top_k = 10;
  std::size_t rebalance = 5;
  double cost = 0.0;    // fraction of notional per fill
  double jitter = 0.0;  // max relative fill perturbation; 0 disables

  void validate() const;
};

enum class ExitReason { Stop, TakeProfit, Rebalance, End };
const char* to_string(ExitReason r);

struct Trade {
  std::string symbol;
  std::size_t entry_day = 0;
  std::size_t exit_day = 0;
  double entry_price = 0.0;
  double exit_price = 0.0;
  ExitReason reason = ExitReason::End;
};

struct EquityCurve {
  std::vector<std::size_t> days;  // panel day indices
  std::vector<double> nv;         // net asset value at each day's close
  std::vector<Trade> trades;

  double total_return() const { return nv.empty() ? 0.0 : nv.back() - 1.0; }
};

/// One signal: predictions made at the close of `day`.
struct Signal {
  std::size_t day = 0;
  std::vector<double> scores;  // one per stock
};

/// Simulates over [range.begin, range.end). NV starts at 1 on the first day.
/// At each signal day t the book is liquidated at the open of t + 1 and the
/// top_k names bought there with equal capital.
EquityCurve simulate_portfolio(const std::vector<Signal>& signals, const market::OhlcvPanel& panel,
                               market::DayRange range, const RiskConfig& risk, std::uint64_t seed = 0);

struct PhaseMetrics {
  int phase_id = 0;
  double ret = 0.0;
  double ic = 0.0;
  std::optional<double> icir;
  double rank_ic = 0.0;
  std::optional<double> rank_icir;
  double prec_at_n = 0.0;
  std::size_t test_days = 0;
};

/// Predictions for one phase's test range.
struct PhasePredictions {
  market::PhaseSplit phase;
  std::vector<std::size_t> days;
  std::vector<std::vector<double>> scores;  // per day, per stock
};

struct BacktestReport {
  std::vector<PhaseMetrics> phases;
  PhaseMetrics mean;  // arithmetic mean over phases (phase_id 0)
  std::vector<EquityCurve> curves;  // first repeat of each phase
  std::size_t repeats = 1;
  std::size_t prec_n = 10;
};

std::vector<Signal> rebalance_signals(const PhasePredictions& p, std::size_t every);

PhaseMetrics evaluate_phase(const PhasePredictions& p, const market::OhlcvPanel& panel,
                            const market::LabelTensor& labels, const RiskConfig& risk, std::size_t repeats,
                            std::uint64_t seed, EquityCurve* first_curve = nullptr);

/// Aggregates per-phase evaluations; PhaseCheckpointMissing when a phase has
/// no predictions.
BacktestReport run_rolling_backtest(const std::vector<PhasePredictions>& phases, const market::OhlcvPanel& panel,
                                    const market::LabelTensor& labels, const RiskConfig& risk, std::size_t repeats,
                                    std::uint64_t seed);

}  // namespace estimate::backtest
