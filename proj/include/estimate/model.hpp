#pragma once

// The assembled predictor: temporal embedding, hypergraph convolution stack
// and the regression head, with the ablation switches.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>

#include "estimate/hypergraph.hpp"
#include "estimate/params.hpp"
#include "estimate/temporal.hpp"

namespace estimate::model {

using ad::Tensor;

struct ModelConfig {
  temporal::TemporalConfig temporal;
  std::size_t hconv_layers = 2;
  std::size_t hconv_width = 32;
  std::size_t order = 3;     // K
  double scale = 1.0;        // s
  std::size_t head_hidden = 32;

  void validate() const;
};

struct AblationFlags {
  bool no_hypergraph = false;    // EST-1
  bool no_dgf = false;           // EST-2
  bool no_corr_augment = false;  // EST-3
  bool fourier_basis = false;    // EST-4

  /// "full", "est1" .. "est4"; throws InvalidArgument on anything else.
  static AblationFlags parse(const std::string& name);
  std::string name() const;
};

/// Per-phase graph inputs, prepared once and shared read-only by every step.
struct GraphContext {
  hypergraph::Hypergraph graph;
  Eigen::MatrixXd incidence;
  Eigen::VectorXd weights;
  Tensor incidence_tensor;
  std::optional<Eigen::MatrixXd> fourier_filter;
};

GraphContext make_graph_context(hypergraph::Hypergraph graph, const ModelConfig& cfg, const AblationFlags& flags);

class EstimateModel {
 public:
  EstimateModel(const ModelConfig& cfg, const AblationFlags& flags, std::size_t stocks, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const AblationFlags& flags() const { return flags_; }
  std::size_t stocks() const { return stocks_; }
  ad::ParameterStore& params() { return store_; }
  const ad::ParameterStore& params() const { return store_; }
  const temporal::TemporalParams& temporal_params() const { return temporal_; }

  /// Generated LSTM weights; may be shared by every day in one batch.
  temporal::LstmWeights generate_weights() const;

  /// window (n, T, C) -> predictions (n, 1).
  Tensor forward(const Tensor& window, const GraphContext& graph) const;
  Tensor forward(const Tensor& window, const GraphContext& graph, const temporal::LstmWeights& weights) const;

  /// Z_H for a given Z_T (exposed for tests).
  Tensor hypergraph_embedding(const Tensor& z_t, const GraphContext& graph) const;

 private:
  ModelConfig cfg_;
  AblationFlags flags_;
  std::size_t stocks_;
  ad::ParameterStore store_;
  temporal::TemporalParams temporal_;
};

}  // namespace estimate::model
