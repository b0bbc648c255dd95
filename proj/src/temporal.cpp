#include "estimate/temporal.hpp"

#include <algorithm>

#include "estimate/error.hpp"

namespace estimate::temporal {

void TemporalConfig::validate() const {
  if (input_channels == 0) throw Error(ErrorCode::ConfigInvalid, "input_channels must be set");
  if (kernel == 0 || lookback < kernel) {
    throw Error(ErrorCode::WindowTooShort, "lookback " + std::to_string(lookback) + " shorter than conv kernel " +
                                               std::to_string(kernel));
  }
  if (proj_width == 0 || conv_channels == 0 || hidden == 0 || memory_dim == 0 || dgf_hidden == 0) {
    throw Error(ErrorCode::ConfigInvalid, "temporal widths must be positive");
  }
}

Tensor LstmWeights::input_gate(std::size_t stock, Gate g) const {
  const std::size_t block = hidden * input_width;
  auto row = ad::select(input.detach(), 0, stock);
  return ad::reshape(ad::slice(row, 0, static_cast<std::size_t>(g) * block, block), {hidden, input_width});
}

Tensor LstmWeights::recurrent_gate(std::size_t stock, Gate g) const {
  const std::size_t block = hidden * hidden;
  auto row = ad::select(recurrent.detach(), 0, stock);
  return ad::reshape(ad::slice(row, 0, static_cast<std::size_t>(g) * block, block), {hidden, hidden});
}

TemporalParams register_temporal_params(ad::ParameterStore& store, const TemporalConfig& cfg, std::size_t stocks,
                                        std::size_t memory_rows, std::uint64_t seed) {
  cfg.validate();
  const std::size_t c = cfg.input_channels, p = cfg.proj_width, k = cfg.kernel, ch = cfg.conv_channels;
  const std::size_t d = cfg.hidden, m = cfg.memory_dim, h = cfg.dgf_hidden, gw = cfg.generated_width();
  using ad::init_normal;
  using ad::init_uniform_fan_in;
  store.add("temporal.proj.w", init_uniform_fan_in("temporal.proj.w", {c, p}, c, seed));
  store.add("temporal.proj.b", init_uniform_fan_in("temporal.proj.b", {1, p}, c, seed));
  store.add("temporal.conv.w", init_uniform_fan_in("temporal.conv.w", {ch, p, k}, p * k, seed));
  store.add("temporal.conv.b", init_uniform_fan_in("temporal.conv.b", {ch}, p * k, seed));
  // Memories are drawn row by row so row i is the same whatever the row count.
  {
    std::vector<double> values;
    for (std::size_t r = 0; r < memory_rows; ++r) {
      auto row = init_normal("temporal.memory." + std::to_string(r), {1, m}, 0.1, seed);
      values.insert(values.end(), row.data().begin(), row.data().end());
    }
    store.add("temporal.memory", Tensor::from({memory_rows, m}, std::move(values), true));
  }
  store.add("temporal.dgf.w1", init_uniform_fan_in("temporal.dgf.w1", {m, h}, m, seed));
  store.add("temporal.dgf.b1", init_uniform_fan_in("temporal.dgf.b1", {1, h}, m, seed));
  // The output bias plays the role of a shared LSTM (standard 1/sqrt(width)
  // scale); memories contribute per-stock deviations around it.
  const std::size_t width = std::max(d, ch);
  store.add("temporal.dgf.w2", init_uniform_fan_in("temporal.dgf.w2", {h, gw}, h * width, seed));
  store.add("temporal.dgf.b2", init_uniform_fan_in("temporal.dgf.b2", {1, gw}, width, seed));
  store.add("temporal.lstm.b", init_uniform_fan_in("temporal.lstm.b", {1, 4 * d}, d, seed));
  store.add("temporal.att.w", init_uniform_fan_in("temporal.att.w", {d, d}, d, seed));
  store.add("temporal.hawkes.eps", init_uniform_fan_in("temporal.hawkes.eps", {1, cfg.seq_len()}, 100, seed));
  store.add("temporal.hawkes.gamma", Tensor::zeros({1, 1}, true));
  return bind_temporal_params(store, stocks, memory_rows);
}

TemporalParams bind_temporal_params(ad::ParameterStore& store, std::size_t stocks, std::size_t memory_rows) {
  TemporalParams p;
  p.proj_w = store.get("temporal.proj.w");
  p.proj_b = store.get("temporal.proj.b");
  p.conv_w = store.get("temporal.conv.w");
  p.conv_b = store.get("temporal.conv.b");
  p.memory = store.get("temporal.memory");
  if (p.memory.dim(0) != memory_rows) throw Error(ErrorCode::ShapeMismatch, "memory bank row count mismatch");
  p.memory_index.resize(stocks);
  for (std::size_t s = 0; s < stocks; ++s) p.memory_index[s] = memory_rows == 1 ? 0 : s;
  p.dgf_w1 = store.get("temporal.dgf.w1");
  p.dgf_b1 = store.get("temporal.dgf.b1");
  p.dgf_w2 = store.get("temporal.dgf.w2");
  p.dgf_b2 = store.get("temporal.dgf.b2");
  p.lstm_b = store.get("temporal.lstm.b");
  p.att_w = store.get("temporal.att.w");
  p.hawkes_eps = store.get("temporal.hawkes.eps");
  p.hawkes_gamma = store.get("temporal.hawkes.gamma");
  return p;
}

Tensor project_input(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 3 || w.rank() != 2 || x.dim(2) != w.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "project_input " + ad::shape_string(x.shape()) + " with weights " +
                                              ad::shape_string(w.shape()));
  }
  const std::size_t n = x.dim(0), t = x.dim(1), c = x.dim(2), p = w.dim(1);
  auto flat = ad::reshape(x, {n * t, c});
  auto y = ad::leaky_relu(ad::add(ad::matmul(flat, w), b));
  return ad::reshape(y, {n, t, p});
}

Tensor conv1d_local_trends(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  return ad::conv1d(x, kernel, bias);
}

Tensor dgf_generate(const Tensor& memory, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2) {
  auto hidden = ad::tanh(ad::add(ad::matmul(memory, w1), b1));
  return ad::add(ad::matmul(hidden, w2), b2);
}

LstmWeights split_generated(const Tensor& flat, std::size_t hidden, std::size_t input_width) {
  const std::size_t in_block = 4 * hidden * input_width;
  const std::size_t rec_block = 4 * hidden * hidden;
  if (flat.rank() != 2 || flat.dim(1) != in_block + rec_block) {
    throw Error(ErrorCode::ShapeMismatch, "generated weights " + ad::shape_string(flat.shape()) +
                                              " do not split into 4x(" + std::to_string(hidden) + "x" +
                                              std::to_string(input_width) + ") + 4x(" + std::to_string(hidden) +
                                              "x" + std::to_string(hidden) + ")");
  }
  LstmWeights w;
  w.input = ad::slice(flat, 1, 0, in_block);
  w.recurrent = ad::slice(flat, 1, in_block, rec_block);
  w.hidden = hidden;
  w.input_width = input_width;
  return w;
}

std::vector<Tensor> lstm_forward(const Tensor& seq, const LstmWeights& w, const Tensor& bias) {
  if (seq.rank() != 3 || seq.dim(0) != w.stocks() || seq.dim(2) != w.input_width) {
    throw Error(ErrorCode::ShapeMismatch, "lstm_forward sequence " + ad::shape_string(seq.shape()));
  }
  const std::size_t n = seq.dim(0), steps = seq.dim(1), d = w.hidden;
  Tensor h = Tensor::zeros({n, d});
  Tensor c = Tensor::zeros({n, d});
  std::vector<Tensor> states;
  states.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    auto x = ad::select(seq, 1, k);
    auto pre = ad::add(ad::add(ad::batched_matvec(w.input, x, 4 * d), ad::batched_matvec(w.recurrent, h, 4 * d)),
                       bias);
    auto i = ad::sigmoid(ad::slice(pre, 1, 0, d));
    auto f = ad::sigmoid(ad::slice(pre, 1, d, d));
    auto g = ad::tanh(ad::slice(pre, 1, 2 * d, d));
    auto o = ad::sigmoid(ad::slice(pre, 1, 3 * d, d));
    c = ad::add(ad::mul(f, c), ad::mul(i, g));
    h = ad::mul(o, ad::tanh(c));
    states.push_back(h);
  }
  return states;
}

namespace {

Tensor attention_weights(const std::vector<Tensor>& hidden, const Tensor& w) {
  if (hidden.empty()) throw Error(ErrorCode::InvalidArgument, "attention over an empty window");
  // h_k^T W h_last as a row-wise dot of h_k with (W h_last)^T.
  auto query = ad::matmul(hidden.back(), ad::transpose(w));
  std::vector<Tensor> scores;
  scores.reserve(hidden.size());
  for (const auto& h : hidden) scores.push_back(ad::sum_axis(ad::mul(h, query), 1));
  return ad::softmax_rows(ad::concat(scores, 1));
}

}  // namespace

AttentionOutput temporal_attention(const std::vector<Tensor>& hidden, const Tensor& w) {
  AttentionOutput out;
  out.alpha = attention_weights(hidden, w);
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    auto term = ad::mul(hidden[k], ad::slice(out.alpha, 1, k, 1));
    out.output = k == 0 ? term : ad::add(out.output, term);
  }
  return out;
}

AttentionOutput hawkes_attention(const std::vector<Tensor>& hidden, const Tensor& w, const Tensor& eps,
                                 const Tensor& gamma_raw) {
  if (eps.size() != hidden.size()) {
    throw Error(ErrorCode::ShapeMismatch, "excitation length " + std::to_string(eps.size()) + " vs window " +
                                              std::to_string(hidden.size()));
  }
  AttentionOutput out;
  out.alpha = attention_weights(hidden, w);
  auto gamma = ad::softplus(gamma_raw);
  auto eps_row = ad::reshape(eps, {1, eps.size()});
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    auto weighted = ad::mul(hidden[k], ad::slice(out.alpha, 1, k, 1));
    // max(x, 0) * exp(-gamma x) only matters where x > 0, so the decay is
    // taken on the clamped value and stays bounded for large negative x.
    auto pos = ad::relu(weighted);
    auto excite = ad::mul(ad::mul(pos, ad::exp(ad::neg(ad::mul(pos, gamma)))), ad::slice(eps_row, 1, k, 1));
    auto term = ad::add(weighted, excite);
    out.output = k == 0 ? term : ad::add(out.output, term);
  }
  return out;
}

LstmWeights generate_lstm_weights(const TemporalParams& p, const TemporalConfig& cfg) {
  auto memories = ad::gather_rows(p.memory, p.memory_index);
  auto flat = dgf_generate(memories, p.dgf_w1, p.dgf_b1, p.dgf_w2, p.dgf_b2);
  return split_generated(flat, cfg.hidden, cfg.conv_channels);
}

Tensor build_temporal_embedding(const Tensor& window, const TemporalParams& p, const TemporalConfig& cfg,
                                const LstmWeights& weights) {
  if (window.rank() != 3 || window.dim(1) != cfg.lookback || window.dim(2) != cfg.input_channels) {
    throw Error(ErrorCode::ShapeMismatch, "temporal window " + ad::shape_string(window.shape()) + " expected (n, " +
                                              std::to_string(cfg.lookback) + ", " +
                                              std::to_string(cfg.input_channels) + ")");
  }
  auto projected = project_input(window, p.proj_w, p.proj_b);
  auto trends = conv1d_local_trends(projected, p.conv_w, p.conv_b);
  auto states = lstm_forward(trends, weights, p.lstm_b);
  return hawkes_attention(states, p.att_w, p.hawkes_eps, p.hawkes_gamma).output;
}

Tensor build_temporal_embedding(const Tensor& window, const TemporalParams& p, const TemporalConfig& cfg) {
  return build_temporal_embedding(window, p, cfg, generate_lstm_weights(p, cfg));
}

}  // namespace estimate::temporal
