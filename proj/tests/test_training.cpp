#include <doctest.h>

#include <cmath>
#include <cstring>

#include "estimate/error.hpp"
#include "estimate/synthetic.hpp"
#include "estimate/training.hpp"

using namespace estimate;
using namespace estimate::training;
using ad::Tensor;

namespace {

struct Fixture {
  market::OhlcvPanel panel;
  Dataset data;
  model::ModelConfig mcfg;
  indicators::IndicatorConfig icfg;

  Fixture() {
    synthetic::MarketConfig mc;
    mc.stocks = 6;
    mc.days = 160;
    mc.industries = 2;
    panel = synthetic::synthetic_market(mc);
    icfg.enabled = {indicators::Indicator::Raw, indicators::Indicator::Rsi, indicators::Indicator::Macd};
    data = make_dataset(panel, icfg, 10, 5);
    auto& t = mcfg.temporal;
    t.input_channels = data.inputs.channels;
    t.lookback = 10;
    t.proj_width = 6;
    t.conv_channels = 4;
    t.kernel = 3;
    t.hidden = 5;
    t.memory_dim = 3;
    t.dgf_hidden = 4;
    mcfg.hconv_width = 5;
    mcfg.head_hidden = 4;
  }

  model::GraphContext graph(const model::AblationFlags& flags = {}) const {
    return model::make_graph_context(build_market_hypergraph(panel, 120, {0, 120}, false), mcfg, flags);
  }
};

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("RMSE on a hand pair") {
    auto loss = rmse_loss(Tensor::from({2, 1}, {0, 0}), {3, 4});
    CHECK(loss.item() == doctest::Approx(std::sqrt(12.5)));
    CHECK_THROWS_AS(rmse_loss(Tensor::zeros({0, 1}), {}), Error);
    CHECK_THROWS_AS(rmse_loss(Tensor::zeros({2, 1}), {1}), Error);
    CHECK_THROWS_AS(rmse_loss(Tensor::zeros({1, 1}), {std::nan("")}), Error);
  }

  TEST_CASE("first Adam step moves each coordinate by lr * sign(g)") {
    auto p = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    auto loss = ad::sum(ad::mul(p, Tensor::from({3}, {0.3, -4.0, 0.0})));
    loss.backward();
    std::vector<Tensor> params{p};
    AdamState st;
    optimizer_step(params, st, 0.01);
    const double g[] = {0.3, -4.0, 0.0};
    const double x0[] = {1.0, -2.0, 0.5};
    for (int i = 0; i < 3; ++i) {
      // m_hat = g, v_hat = g^2 after bias correction
      CHECK(p[i] == doctest::Approx(x0[i] - 0.01 * g[i] / (std::abs(g[i]) + 1e-8)).epsilon(1e-14));
    }
    CHECK(st.step == 1);
  }

  TEST_CASE("sample days exclude windows and labels crossing the range") {
    Fixture f;
    auto days = f.data.sample_days({0, 100}, true);
    REQUIRE_FALSE(days.empty());
    for (auto d : days) {
      CHECK(d + 5 < 100);
      CHECK(f.data.window_complete(d));
    }
    CHECK(f.data.window(days.front()).shape() == ad::Shape{6, 10, f.data.inputs.channels});
  }

  TEST_CASE("patience zero stops after one epoch") {
    Fixture f;
    auto ctx = f.graph();
    model::EstimateModel m(f.mcfg, {}, 6, 3);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.patience = 0;
    auto ck = fit(m, f.data, ctx, f.data.sample_days({0, 100}, true), f.data.sample_days({100, 130}, true), cfg);
    CHECK(ck.history.size() == 1);
    CHECK(ck.epoch == 1);
    CHECK_THROWS_AS(fit(m, f.data, ctx, {}, {}, cfg), Error);
  }

  TEST_CASE("training is deterministic and the best checkpoint reloads exactly") {
    Fixture f;
    auto ctx = f.graph();
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.patience = 3;
    cfg.batch_days = 4;
    cfg.learning_rate = 1e-2;
    const auto train = f.data.sample_days({0, 100}, true);
    const auto valid = f.data.sample_days({100, 130}, true);
    model::EstimateModel a(f.mcfg, {}, 6, 3), b(f.mcfg, {}, 6, 3);
    auto ca = fit(a, f.data, ctx, train, valid, cfg);
    auto cb = fit(b, f.data, ctx, train, valid, cfg);
    CHECK(ca.params.dump() == cb.params.dump());
    CHECK(ca.valid_rmse == cb.valid_rmse);
    CHECK(ca.valid_rmse == doctest::Approx(evaluate_rmse(a, f.data, ctx, valid)).epsilon(1e-12));

    auto restored = Checkpoint::from_json(nlohmann::json::parse(ca.to_json().dump()));
    model::EstimateModel c(f.mcfg, {}, 6, 99);
    ad::parameters_from_json(restored.params, c.params());
    auto w = f.data.window(valid.front());
    CHECK(same_bits(a.forward(w, ctx).data(), c.forward(w, ctx).data()));
    CHECK(restored.history.size() == ca.history.size());
  }

  TEST_CASE("shared-memory variant equals the full model with identical memories") {
    Fixture f;
    auto flags2 = model::AblationFlags::parse("est2");
    auto ctx = f.graph();
    model::EstimateModel full(f.mcfg, {}, 6, 5), shared(f.mcfg, flags2, 6, 5);
    auto& mf = full.params().get("temporal.memory");
    auto& ms = shared.params().get("temporal.memory");
    REQUIRE(ms.dim(0) == 1);
    auto row = ms.data();
    auto dst = mf.mutable_data();
    for (std::size_t r = 0; r < mf.dim(0); ++r)
      std::copy(row.begin(), row.end(), dst.begin() + static_cast<long>(r * row.size()));
    const auto day = f.data.sample_days({0, 100}, true).front();
    auto w = f.data.window(day);
    CHECK(same_bits(full.forward(w, ctx).data(), shared.forward(w, ctx).data()));
    auto lf = rmse_loss(full.forward(w, ctx), f.data.label_row(day)).item();
    auto ls = rmse_loss(shared.forward(w, ctx), f.data.label_row(day)).item();
    CHECK(lf == ls);
  }

  TEST_CASE("every ablation runs forward and backward") {
    Fixture f;
    const auto day = f.data.sample_days({0, 100}, true).front();
    for (auto name : {"full", "est1", "est2", "est3", "est4"}) {
      auto flags = model::AblationFlags::parse(name);
      CHECK(flags.name() == name);
      auto ctx = f.graph(flags);
      model::EstimateModel m(f.mcfg, flags, 6, 1);
      auto out = m.forward(f.data.window(day), ctx);
      CHECK(out.shape() == ad::Shape{6, 1});
      rmse_loss(out, f.data.label_row(day)).backward();
    }
    CHECK_THROWS_AS(model::AblationFlags::parse("est9"), Error);
  }

  TEST_CASE("model gradient check") {
    Fixture f;
    auto ctx = f.graph();
    model::EstimateModel m(f.mcfg, {}, 6, 2);
    const auto day = f.data.sample_days({0, 100}, true).front();
    auto w = f.data.window(day);
    auto labels = f.data.label_row(day);
    auto res = ad::grad_check([&] { return rmse_loss(m.forward(w, ctx), labels); }, m.params().tensors());
    CHECK(res.max_rel_error < 1e-5);
  }
}
