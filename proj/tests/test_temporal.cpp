#include <doctest.h>

#include <cmath>

#include "estimate/error.hpp"
#include "estimate/temporal.hpp"
#include "support.hpp"

using namespace estimate;
using namespace estimate::temporal;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TemporalConfig tiny_config() {
  TemporalConfig cfg;
  cfg.input_channels = 3;
  cfg.lookback = 6;
  cfg.proj_width = 4;
  cfg.conv_channels = 3;
  cfg.kernel = 2;
  cfg.hidden = 3;
  cfg.memory_dim = 2;
  cfg.dgf_hidden = 3;
  return cfg;
}

}  // namespace

TEST_SUITE("temporal") {
  TEST_CASE("LSTM two steps match a hand recurrence") {
    // one stock, scalar state: W = [wi wf wg wo], U = [ui uf ug uo]
    const std::vector<double> W{0.5, -0.3, 0.8, 0.2}, U{0.1, 0.4, -0.6, 0.7}, B{0.05, 1.0, -0.1, 0.0};
    LstmWeights w{Tensor::from({1, 4}, W), Tensor::from({1, 4}, U), 1, 1};
    auto seq = Tensor::from({1, 2, 1}, {1.5, -0.7});
    auto states = lstm_forward(seq, w, Tensor::from({1, 4}, B));
    double h = 0, c = 0;
    for (double x : {1.5, -0.7}) {
      const double i = sig(W[0] * x + U[0] * h + B[0]);
      const double f = sig(W[1] * x + U[1] * h + B[1]);
      const double g = std::tanh(W[2] * x + U[2] * h + B[2]);
      const double o = sig(W[3] * x + U[3] * h + B[3]);
      c = f * c + i * g;
      h = o * std::tanh(c);
    }
    REQUIRE(states.size() == 2);
    CHECK(states[1].item() == doctest::Approx(h).epsilon(1e-14));
  }

  TEST_CASE("generated weight layout") {
    auto flat = Tensor::from({1, 4 * 2 * 1 + 4 * 2 * 2}, [] {
      std::vector<double> v(24);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
      return v;
    }());
    auto w = split_generated(flat, 2, 1);
    CHECK(w.input_gate(0, Gate::Forget).at(1, 0) == 3);
    CHECK(w.recurrent_gate(0, Gate::Input).at(0, 1) == 9);
    CHECK(w.recurrent_gate(0, Gate::Output).at(1, 1) == 23);
  }

  TEST_CASE("attention weights form a distribution") {
    std::mt19937_64 rng(3);
    std::vector<Tensor> hs;
    for (int k = 0; k < 5; ++k) hs.push_back(testsupport::random_tensor({4, 3}, rng));
    auto att = temporal_attention(hs, testsupport::random_tensor({3, 3}, rng));
    for (std::size_t i = 0; i < 4; ++i) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        CHECK(att.alpha.at(i, k) >= 0);
        s += att.alpha.at(i, k);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("zero excitation reduces the Hawkes term to plain attention") {
    std::mt19937_64 rng(4);
    std::vector<Tensor> hs;
    for (int k = 0; k < 5; ++k) hs.push_back(testsupport::random_tensor({4, 3}, rng));
    auto w = testsupport::random_tensor({3, 3}, rng);
    auto plain = temporal_attention(hs, w).output;
    auto hk = hawkes_attention(hs, w, Tensor::zeros({1, 5}), Tensor::scalar(0.3)).output;
    for (std::size_t i = 0; i < plain.size(); ++i) CHECK(hk[i] == plain[i]);
    auto excited = hawkes_attention(hs, w, Tensor::full({1, 5}, 0.5), Tensor::scalar(0.3)).output;
    bool differs = false;
    for (std::size_t i = 0; i < plain.size(); ++i) differs |= excited[i] != plain[i];
    CHECK(differs);
    CHECK_THROWS_AS(hawkes_attention(hs, w, Tensor::zeros({1, 4}), Tensor::scalar(0.0)), Error);
  }

  TEST_CASE("window shorter than the kernel") {
    auto x = Tensor::zeros({2, 2, 3});
    CHECK_THROWS_AS(conv1d_local_trends(x, Tensor::zeros({4, 3, 3}), Tensor::zeros({4})), Error);
  }

  TEST_CASE("embedding shape and end-to-end gradient") {
    auto cfg = tiny_config();
    ad::ParameterStore store;
    auto p = register_temporal_params(store, cfg, 3, 3, 17);
    std::mt19937_64 rng(5);
    auto window = testsupport::random_tensor({3, cfg.lookback, cfg.input_channels}, rng);
    auto z = build_temporal_embedding(window, p, cfg);
    CHECK(z.shape() == ad::Shape{3, cfg.hidden});
    // excitation on so its gradient path is exercised
    for (auto& v : store.get("temporal.hawkes.eps").mutable_data()) v = 0.4;
    auto res = ad::grad_check([&] { return ad::sum(ad::square(build_temporal_embedding(window, p, cfg))); },
                              store.tensors());
    CHECK(res.max_rel_error < 1e-6);
  }

  TEST_CASE("stocks sharing a memory row get identical LSTM weights") {
    auto cfg = tiny_config();
    ad::ParameterStore store;
    auto p = register_temporal_params(store, cfg, 4, 1, 2);
    auto w = generate_lstm_weights(p, cfg);
    for (std::size_t s = 1; s < 4; ++s) {
      auto a = w.input_gate(0, Gate::Cell), b = w.input_gate(s, Gate::Cell);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
  }
}
