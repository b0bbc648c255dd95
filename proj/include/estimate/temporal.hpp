#pragma once

// Per-stock temporal embedding: input projection, 1-D convolution over the
// lookback window, an LSTM whose weights are generated per stock from a
// learnable memory vector, and attention with a Hawkes-style excitation term.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "estimate/params.hpp"
#include "estimate/tensor.hpp"

namespace estimate::temporal {

using ad::Tensor;

struct TemporalConfig {
  std::size_t input_channels = 0;
  std::size_t lookback = 20;
  std::size_t proj_width = 64;
  std::size_t conv_channels = 32;
  std::size_t kernel = 3;
  std::size_t hidden = 64;
  std::size_t memory_dim = 32;
  std::size_t dgf_hidden = 32;

  std::size_t seq_len() const { return lookback - kernel + 1; }
  // Flat length of one stock's generated {W_i, W_f, W_g, W_o, U_i, U_f, U_g, U_o}.
  std::size_t generated_width() const { return 4 * hidden * conv_channels + 4 * hidden * hidden; }
  void validate() const;
};

enum class Gate { Input = 0, Forget = 1, Cell = 2, Output = 3 };

/// Batched LSTM weights, one row per stock. Each row of `input` holds the
/// (4d x d_in) row-major stack [W_i; W_f; W_g; W_o]; `recurrent` likewise
/// holds [U_i; U_f; U_g; U_o] as (4d x d).
struct LstmWeights {
  Tensor input;
  Tensor recurrent;
  std::size_t hidden = 0;
  std::size_t input_width = 0;

  std::size_t stocks() const { return input.dim(0); }
  // One gate matrix for one stock, detached (for inspection).
  Tensor input_gate(std::size_t stock, Gate g) const;
  Tensor recurrent_gate(std::size_t stock, Gate g) const;
};

/// Handles into a ParameterStore plus the stock -> memory-row map.
struct TemporalParams {
  Tensor proj_w, proj_b;
  Tensor conv_w, conv_b;
  Tensor memory;
  std::vector<std::size_t> memory_index;
  Tensor dgf_w1, dgf_b1, dgf_w2, dgf_b2;
  Tensor lstm_b;
  Tensor att_w;
  Tensor hawkes_eps;
  Tensor hawkes_gamma;  // pre-softplus
};

/// Registers every temporal parameter under "temporal.*". `memory_rows` is
/// the stock count, or 1 for a single shared memory.
TemporalParams register_temporal_params(ad::ParameterStore& store, const TemporalConfig& cfg, std::size_t stocks,
                                        std::size_t memory_rows, std::uint64_t seed);
TemporalParams bind_temporal_params(ad::ParameterStore& store, std::size_t stocks, std::size_t memory_rows);

// x: (n, T, C) -> (n, T, P); shared weights, LeakyReLU.
Tensor project_input(const Tensor& x, const Tensor& w, const Tensor& b);

// Valid convolution over the time axis; WindowTooShort if T < kernel width.
Tensor conv1d_local_trends(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Two-layer perceptron (tanh hidden, linear output) from memories (rows, m)
// to flat generated weights (rows, generated_width).
Tensor dgf_generate(const Tensor& memory, const Tensor& w1, const Tensor& b1, const Tensor& w2, const Tensor& b2);
LstmWeights split_generated(const Tensor& flat, std::size_t hidden, std::size_t input_width);

// seq: (n, L, d_in). Returns h_1..h_L, each (n, d); h0 = c0 = 0.
std::vector<Tensor> lstm_forward(const Tensor& seq, const LstmWeights& w, const Tensor& bias);

struct AttentionOutput {
  Tensor output;  // (n, d)
  Tensor alpha;   // (n, L)
};

// alpha_k = softmax_k(h_k^T W h_last); output = sum_k alpha_k h_k.
AttentionOutput temporal_attention(const std::vector<Tensor>& hidden, const Tensor& w);

// output = sum_k alpha_k h_k + eps_k * max(alpha_k h_k, 0) * exp(-gamma * alpha_k h_k),
// elementwise, gamma = softplus(gamma_raw), eps indexed by position in the window.
AttentionOutput hawkes_attention(const std::vector<Tensor>& hidden, const Tensor& w, const Tensor& eps,
                                 const Tensor& gamma_raw);

/// Full path for one day's window (n, T, C) -> Z_T (n, d).
Tensor build_temporal_embedding(const Tensor& window, const TemporalParams& p, const TemporalConfig& cfg);

/// Same, with precomputed generated weights (shared across days in a batch).
Tensor build_temporal_embedding(const Tensor& window, const TemporalParams& p, const TemporalConfig& cfg,
                                const LstmWeights& weights);

LstmWeights generate_lstm_weights(const TemporalParams& p, const TemporalConfig& cfg);

}  // namespace estimate::temporal
