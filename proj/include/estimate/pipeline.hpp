#pragma once

// Stage orchestration: ingest -> features -> graph -> train -> predict ->
// backtest -> report, with artifacts and a manifest under one run directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "estimate/backtest.hpp"
#include "estimate/hypergraph.hpp"
#include "estimate/indicators.hpp"
#include "estimate/market_data.hpp"
#include "estimate/model.hpp"
#include "estimate/training.hpp"

namespace estimate::pipeline {

/// Every tunable of a run. Serialized as one flat JSON object; unknown keys
/// are rejected.
struct RunConfig {
  indicators::IndicatorConfig indicators;
  model::ModelConfig model;
  training::TrainConfig train;
  hypergraph::CorrelationConfig correlation;
  market::PhaseConfig phases;
  backtest::RiskConfig risk;
  std::size_t lookahead = 5;
  std::size_t repeats = 1;
  std::size_t max_phases = 0;  // 0 keeps every phase

  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> kCommands{"ingest", "features", "graph",   "train",
                                                  "predict", "backtest", "report"};
  return kCommands;
}

struct Options {
  std::string command;
  std::filesystem::path data;
  std::filesystem::path meta;
  std::filesystem::path config;
  std::filesystem::path out = "run";
  std::optional<int> phase;  // 1-based
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ablation;
  std::optional<std::size_t> repeats;
  std::size_t parallel_phases = 1;
  std::filesystem::path executable;  // needed for parallel phase workers
};

/// Runs one stage; throws estimate::Error on failure.
void run_stage(const Options& opts, std::ostream& log);

/// Runs one stage and maps failures to exit codes: 0 ok, 1 usage,
/// 2 data error, 3 runtime error.
int run_pipeline(const Options& opts, std::ostream& log, std::ostream& err);

int exit_code_for(const std::exception& e);

nlohmann::json report_to_json(const backtest::BacktestReport& report, const market::OhlcvPanel& panel);

/// Writes report.csv, report.json, equity/phase_XX.csv and
/// cumulative_returns.csv into `dir`. Files are staged and renamed so a
/// failure leaves no partial output. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const backtest::BacktestReport& report,
                                               const market::OhlcvPanel& panel, const std::filesystem::path& dir);

nlohmann::json hypergraph_to_json(const hypergraph::Hypergraph& h, const market::OhlcvPanel& panel);

}  // namespace estimate::pipeline
