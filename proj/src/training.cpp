#include "estimate/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "estimate/error.hpp"

namespace estimate::training {

bool Dataset::window_complete(std::size_t day) const {
  if (day + 1 < lookback || day >= inputs.days) return false;
  for (std::size_t t = day + 1 - lookback; t <= day; ++t) {
    if (!inputs.day_complete(t)) return false;
  }
  return true;
}

Tensor Dataset::window(std::size_t day) const {
  if (!window_complete(day)) {
    throw Error(ErrorCode::InsufficientHistory, "no complete input window ending at day " + std::to_string(day));
  }
  const std::size_t n = inputs.stocks, c = inputs.channels, first = day + 1 - lookback;
  std::vector<double> v(n * lookback * c);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t k = 0; k < lookback; ++k) {
      const double* src = &inputs.values[(s * inputs.days + first + k) * c];
      std::copy(src, src + c, v.begin() + static_cast<std::ptrdiff_t>((s * lookback + k) * c));
    }
  return Tensor::from({n, lookback, c}, std::move(v));
}

std::vector<double> Dataset::label_row(std::size_t day) const {
  std::vector<double> row(labels.stocks);
  for (std::size_t s = 0; s < labels.stocks; ++s) row[s] = labels.at(s, day);
  return row;
}

std::vector<std::size_t> Dataset::sample_days(market::DayRange range, bool label_inside) const {
  std::vector<std::size_t> days;
  for (std::size_t t = range.begin; t < range.end; ++t) {
    if (!labels.defined(t) || !window_complete(t)) continue;
    if (label_inside && t + labels.lookahead >= range.end) continue;
    days.push_back(t);
  }
  return days;
}

Dataset make_dataset(const market::OhlcvPanel& panel, const indicators::IndicatorConfig& ind, std::size_t lookback,
                     std::size_t lookahead) {
  if (lookback == 0) throw Error(ErrorCode::InvalidArgument, "lookback must be positive");
  Dataset d;
  d.lookback = lookback;
  d.inputs = indicators::model_inputs(indicators::assemble_features(panel, ind), lookback);
  d.labels = market::compute_labels(panel, lookahead);
  return d;
}

hypergraph::Hypergraph build_market_hypergraph(const market::OhlcvPanel& panel, std::size_t end_day,
                                               market::DayRange cap_window, bool correlation_edges,
                                               const hypergraph::CorrelationConfig& corr) {
  std::vector<std::string> industries(panel.stocks());
  for (std::size_t s = 0; s < panel.stocks() && s < panel.meta.size(); ++s) industries[s] = panel.meta[s].industry;
  const auto caps = hypergraph::capitalization(panel, cap_window);
  auto graph = hypergraph::build_industry_hypergraph(industries, caps);
  if (correlation_edges) {
    for (auto& e : hypergraph::augment_with_correlation(panel, end_day, caps, corr)) graph.edges.push_back(e);
  }
  graph.validate();
  return graph;
}

PhaseGraphs build_phase_graphs(const market::OhlcvPanel& panel, const market::PhaseSplit& phase,
                               bool correlation_edges, const hypergraph::CorrelationConfig& corr) {
  PhaseGraphs g;
  g.train = build_market_hypergraph(panel, phase.train.end, phase.train, correlation_edges, corr);
  g.test = build_market_hypergraph(panel, phase.test.begin, phase.train, correlation_edges, corr);
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::ConfigInvalid, "learning_rate must be positive");
  }
  if (batch_days == 0) throw Error(ErrorCode::ConfigInvalid, "batch_days must be positive");
  if (epochs == 0) throw Error(ErrorCode::ConfigInvalid, "epochs must be positive");
  if (patience > epochs) throw Error(ErrorCode::ConfigInvalid, "patience must not exceed epochs");
}

Tensor rmse_loss(const Tensor& predictions, const std::vector<double>& labels) {
  if (labels.empty() || predictions.size() == 0) throw Error(ErrorCode::EmptyBatch, "rmse over an empty batch");
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "rmse: " + std::to_string(predictions.size()) + " predictions vs " +
                                              std::to_string(labels.size()) + " labels");
  }
  for (double v : labels) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "rmse: non-finite label");
  }
  auto target = Tensor::from(predictions.shape(), labels);
  return ad::sqrt(ad::mean(ad::square(ad::sub(predictions, target))));
}

void optimizer_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto x = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      x[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
    }
  }
}

nlohmann::json Checkpoint::to_json() const {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : history) {
    hist.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"valid_rmse", h.valid_rmse}});
  }
  return {{"params", params},
          {"epoch", epoch},
          {"valid_rmse", valid_rmse},
          {"config_hash", config_hash},
          {"history", hist}};
}

Checkpoint Checkpoint::from_json(const nlohmann::json& j) {
  Checkpoint c;
  try {
    c.params = j.at("params");
    c.epoch = j.at("epoch").get<std::size_t>();
    c.valid_rmse = j.at("valid_rmse").get<double>();
    c.config_hash = j.value("config_hash", "");
    for (const auto& h : j.value("history", nlohmann::json::array())) {
      c.history.push_back({h.at("epoch").get<std::size_t>(), h.at("train_loss").get<double>(),
                           h.at("valid_rmse").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

double evaluate_rmse(const model::EstimateModel& m, const Dataset& data, const model::GraphContext& graph,
                     const std::vector<std::size_t>& days) {
  if (days.empty()) throw Error(ErrorCode::EmptyBatch, "no evaluation days");
  ad::NoGradGuard guard;
  const auto weights = m.generate_weights();
  double total = 0.0;
  for (auto day : days) total += rmse_loss(m.forward(data.window(day), graph, weights), data.label_row(day)).item();
  return total / static_cast<double>(days.size());
}

std::vector<std::vector<double>> predict_days(const model::EstimateModel& m, const Dataset& data,
                                              const model::GraphContext& graph, const std::vector<std::size_t>& days) {
  ad::NoGradGuard guard;
  const auto weights = m.generate_weights();
  std::vector<std::vector<double>> out;
  out.reserve(days.size());
  for (auto day : days) {
    auto pred = m.forward(data.window(day), graph, weights);
    out.emplace_back(pred.data().begin(), pred.data().end());
  }
  return out;
}

Checkpoint fit(model::EstimateModel& m, const Dataset& data, const model::GraphContext& graph,
               const std::vector<std::size_t>& train_days, const std::vector<std::size_t>& valid_days,
               const TrainConfig& cfg) {
  cfg.validate();
  if (train_days.empty()) throw Error(ErrorCode::NoTrainableDays, "no training day has a complete window and label");
  auto& params = m.params().tensors();
  std::mt19937_64 rng(cfg.seed);
  AdamState adam;
  Checkpoint best;
  best.valid_rmse = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> snapshot;
  std::size_t since_best = 0;
  std::vector<std::size_t> order = train_days;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_days) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_days);
      m.params().zero_grad();
      const auto weights = m.generate_weights();
      Tensor loss;
      for (std::size_t i = start; i < stop; ++i) {
        auto day_loss = rmse_loss(m.forward(data.window(order[i]), graph, weights), data.label_row(order[i]));
        loss = loss.defined() ? ad::add(loss, day_loss) : day_loss;
      }
      const double count = static_cast<double>(stop - start);
      loss = ad::scale(loss, 1.0 / count);
      total += loss.item() * count;
      loss.backward();
      optimizer_step(params, adam, cfg.learning_rate);
    }
    EpochRecord rec{epoch, total / static_cast<double>(order.size()), 0.0};
    rec.valid_rmse = valid_days.empty() ? rec.train_loss : evaluate_rmse(m, data, graph, valid_days);
    best.history.push_back(rec);
    if (rec.valid_rmse < best.valid_rmse) {
      best.valid_rmse = rec.valid_rmse;
      best.epoch = epoch;
      snapshot.clear();
      for (const auto& p : params) snapshot.emplace_back(p.data().begin(), p.data().end());
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto x = params[i].mutable_data();
    std::copy(snapshot[i].begin(), snapshot[i].end(), x.begin());
  }
  m.params().zero_grad();
  best.params = ad::parameters_to_json(m.params());
  return best;
}

Checkpoint train_phase(const market::OhlcvPanel& panel, const Dataset& data, const market::PhaseSplit& phase,
                       const model::ModelConfig& mcfg, const TrainConfig& cfg,
                       const hypergraph::CorrelationConfig& corr, const std::string& config_hash) {
  const auto graphs = build_phase_graphs(panel, phase, !cfg.ablation.no_corr_augment, corr);
  const auto context = model::make_graph_context(graphs.train, mcfg, cfg.ablation);
  model::EstimateModel m(mcfg, cfg.ablation, panel.stocks(), cfg.seed);
  const auto train_days = data.sample_days(phase.train, true);
  const auto valid_days = data.sample_days(phase.valid, true);
  if (train_days.empty()) {
    throw Error(ErrorCode::NoTrainableDays, "phase " + std::to_string(phase.phase_id) + " has no trainable days");
  }
  auto ckpt = fit(m, data, context, train_days, valid_days, cfg);
  ckpt.config_hash = config_hash;
  return ckpt;
}

}  // namespace estimate::training
