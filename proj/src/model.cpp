#include "estimate/model.hpp"

#include "estimate/error.hpp"

namespace estimate::model {

void ModelConfig::validate() const {
  temporal.validate();
  if (hconv_width == 0) throw Error(ErrorCode::ConfigInvalid, "hconv_width must be positive");
  if (head_hidden == 0) throw Error(ErrorCode::ConfigInvalid, "head_hidden must be positive");
  if (!(scale >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "wavelet scale must be non-negative");
}

AblationFlags AblationFlags::parse(const std::string& name) {
  AblationFlags f;
  if (name == "full" || name.empty()) return f;
  if (name == "est1") f.no_hypergraph = true;
  else if (name == "est2") f.no_dgf = true;
  else if (name == "est3") f.no_corr_augment = true;
  else if (name == "est4") f.fourier_basis = true;
  else throw Error(ErrorCode::InvalidArgument, "unknown ablation '" + name + "' (expected full, est1..est4)");
  return f;
}

std::string AblationFlags::name() const {
  const int count = no_hypergraph + no_dgf + no_corr_augment + fourier_basis;
  if (count == 0) return "full";
  if (count > 1) return "custom";
  if (no_hypergraph) return "est1";
  if (no_dgf) return "est2";
  if (no_corr_augment) return "est3";
  return "est4";
}

GraphContext make_graph_context(hypergraph::Hypergraph graph, const ModelConfig& cfg, const AblationFlags& flags) {
  graph.validate();
  GraphContext g;
  g.incidence = graph.incidence();
  g.weights = graph.weights();
  g.incidence_tensor = hypergraph::to_tensor(g.incidence);
  if (flags.fourier_basis && !flags.no_hypergraph) {
    auto cache = hypergraph::spectral_prepare(graph);
    g.fourier_filter = hypergraph::heat_kernel(cache, cfg.scale);
  }
  g.graph = std::move(graph);
  return g;
}

EstimateModel::EstimateModel(const ModelConfig& cfg, const AblationFlags& flags, std::size_t stocks,
                             std::uint64_t seed)
    : cfg_(cfg), flags_(flags), stocks_(stocks) {
  cfg_.validate();
  if (stocks == 0) throw Error(ErrorCode::InvalidArgument, "model needs at least one stock");
  temporal_ = temporal::register_temporal_params(store_, cfg_.temporal, stocks, flags.no_dgf ? 1 : stocks, seed);
  using ad::init_uniform_fan_in;
  std::size_t width = cfg_.temporal.hidden;
  if (!flags.no_hypergraph) {
    const auto theta0 = hypergraph::heat_series_coefficients(cfg_.scale, cfg_.order);
    for (std::size_t l = 0; l < cfg_.hconv_layers; ++l) {
      const std::string prefix = "hgconv." + std::to_string(l) + ".";
      store_.add(prefix + "P", init_uniform_fan_in(prefix + "P", {width, cfg_.hconv_width}, width, seed));
      if (!flags.fourier_basis) {
        store_.add(prefix + "theta", Tensor::from({1, cfg_.order + 1}, theta0, true));
        store_.add(prefix + "att.a",
                   init_uniform_fan_in(prefix + "att.a", {2 * cfg_.hconv_width, 1}, cfg_.hconv_width, seed));
      }
      width = cfg_.hconv_width;
    }
  }
  const std::size_t head_in = cfg_.temporal.hidden + (flags.no_hypergraph || cfg_.hconv_layers == 0 ? 0 : width);
  store_.add("head.w1", init_uniform_fan_in("head.w1", {head_in, cfg_.head_hidden}, head_in, seed));
  store_.add("head.b1", init_uniform_fan_in("head.b1", {1, cfg_.head_hidden}, head_in, seed));
  store_.add("head.w2", init_uniform_fan_in("head.w2", {cfg_.head_hidden, 1}, cfg_.head_hidden, seed));
  store_.add("head.b2", init_uniform_fan_in("head.b2", {1, 1}, cfg_.head_hidden, seed));
}

temporal::LstmWeights EstimateModel::generate_weights() const {
  return temporal::generate_lstm_weights(temporal_, cfg_.temporal);
}

Tensor EstimateModel::hypergraph_embedding(const Tensor& z_t, const GraphContext& graph) const {
  Tensor z = z_t;
  for (std::size_t l = 0; l < cfg_.hconv_layers; ++l) {
    const std::string prefix = "hgconv." + std::to_string(l) + ".";
    const auto& p = store_.get(prefix + "P");
    if (flags_.fourier_basis) {
      if (!graph.fourier_filter) throw Error(ErrorCode::InvalidArgument, "graph context lacks the spectral filter");
      z = hypergraph::fourier_hconv(z, *graph.fourier_filter, p);
    } else {
      auto att = hypergraph::hyperedge_attention(z, graph.incidence, p, store_.get(prefix + "att.a"));
      z = hypergraph::wavelet_hconv(z, att, graph.weights, p, store_.get(prefix + "theta"));
    }
  }
  return z;
}

Tensor EstimateModel::forward(const Tensor& window, const GraphContext& graph,
                              const temporal::LstmWeights& weights) const {
  if (window.rank() != 3 || window.dim(0) != stocks_) {
    throw Error(ErrorCode::ShapeMismatch, "model window " + ad::shape_string(window.shape()) + " for " +
                                              std::to_string(stocks_) + " stocks");
  }
  auto z_t = temporal::build_temporal_embedding(window, temporal_, cfg_.temporal, weights);
  Tensor z_h;
  if (!flags_.no_hypergraph && cfg_.hconv_layers > 0) {
    if (graph.graph.n != stocks_) throw Error(ErrorCode::ShapeMismatch, "hypergraph size differs from stock count");
    z_h = hypergraph_embedding(z_t, graph);
  }
  return hypergraph::predict_head(z_t, z_h, store_.get("head.w1"), store_.get("head.b1"), store_.get("head.w2"),
                                  store_.get("head.b2"));
}

Tensor EstimateModel::forward(const Tensor& window, const GraphContext& graph) const {
  return forward(window, graph, generate_weights());
}

}  // namespace estimate::model
