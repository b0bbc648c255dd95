#pragma once

// Phase-level training: RMSE objective, Adam, validation early stopping.

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "estimate/hypergraph.hpp"
#include "estimate/indicators.hpp"
#include "estimate/market_data.hpp"
#include "estimate/model.hpp"

namespace estimate::training {

using ad::Tensor;

/// Model inputs and labels for a whole panel.
struct Dataset {
  market::FeatureTensor inputs;
  market::LabelTensor labels;
  std::size_t lookback = 20;

  std::size_t stocks() const { return inputs.stocks; }
  /// True when every stock has every channel over [day - lookback + 1, day].
  bool window_complete(std::size_t day) const;
  /// (n, lookback, C) input window ending at `day` inclusive.
  Tensor window(std::size_t day) const;
  std::vector<double> label_row(std::size_t day) const;
  /// Days in `range` with a complete window and a defined label. With
  /// `label_inside`, the label horizon must also end inside the range.
  std::vector<std::size_t> sample_days(market::DayRange range, bool label_inside) const;
};

Dataset make_dataset(const market::OhlcvPanel& panel, const indicators::IndicatorConfig& ind, std::size_t lookback,
                     std::size_t lookahead);

/// Graphs used by one phase: the training graph uses history ending at the
/// training end, the test graph history ending at the test start.
struct PhaseGraphs {
  hypergraph::Hypergraph train;
  hypergraph::Hypergraph test;
};

PhaseGraphs build_phase_graphs(const market::OhlcvPanel& panel, const market::PhaseSplit& phase,
                               bool correlation_edges, const hypergraph::CorrelationConfig& corr = {});

/// Industry edges plus, optionally, correlation edges from closes before `end_day`.
hypergraph::Hypergraph build_market_hypergraph(const market::OhlcvPanel& panel, std::size_t end_day,
                                               market::DayRange cap_window, bool correlation_edges,
                                               const hypergraph::CorrelationConfig& corr = {});

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_days = 1;
  std::size_t epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 7;
  model::AblationFlags ablation;

  void validate() const;
};

/// sqrt(mean((pred - label)^2)); EmptyBatch when there is nothing to compare.
Tensor rmse_loss(const Tensor& predictions, const std::vector<double>& labels);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of every tensor in `params` from its grad.
/// Tensors without a gradient are treated as having a zero gradient.
void optimizer_step(std::vector<Tensor>& params, AdamState& state, double lr);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_rmse = 0.0;
};

struct Checkpoint {
  nlohmann::json params;  // parameters_to_json of the best epoch
  std::size_t epoch = 0;  // best epoch, 1-based
  double valid_rmse = 0.0;
  std::string config_hash;
  std::vector<EpochRecord> history;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);
};

/// Mean per-day RMSE of the model over `days` (no gradient recording).
double evaluate_rmse(const model::EstimateModel& m, const Dataset& data, const model::GraphContext& graph,
                     const std::vector<std::size_t>& days);

/// Predictions (n) for each day.
std::vector<std::vector<double>> predict_days(const model::EstimateModel& m, const Dataset& data,
                                              const model::GraphContext& graph, const std::vector<std::size_t>& days);

/// Trains on `train_days`, early-stops on `valid_days`, returns the best
/// checkpoint and leaves the model holding the best parameters. With no
/// validation days the training loss is used for model selection.
Checkpoint fit(model::EstimateModel& m, const Dataset& data, const model::GraphContext& graph,
               const std::vector<std::size_t>& train_days, const std::vector<std::size_t>& valid_days,
               const TrainConfig& cfg);

/// Builds the phase graph and model, trains on the phase's training range
/// with validation on its validation range.
Checkpoint train_phase(const market::OhlcvPanel& panel, const Dataset& data, const market::PhaseSplit& phase,
                       const model::ModelConfig& mcfg, const TrainConfig& cfg,
                       const hypergraph::CorrelationConfig& corr = {}, const std::string& config_hash = "");

}  // namespace estimate::training
