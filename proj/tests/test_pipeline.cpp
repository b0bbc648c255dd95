#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "estimate/error.hpp"
#include "estimate/pipeline.hpp"
#include "estimate/synthetic.hpp"

using namespace estimate;
using namespace estimate::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json tiny_config() {
  return {{"lookback", 8},        {"proj_width", 4},     {"conv_channels", 3}, {"kernel", 3},
          {"hidden", 4},          {"memory_dim", 2},     {"dgf_hidden", 3},    {"hconv_width", 4},
          {"head_hidden", 4},     {"epochs", 2},         {"patience", 2},      {"batch_days", 8},
          {"train_months", 2},    {"valid_months", 1},   {"test_months", 1},   {"stride_days", 30},
          {"max_phases", 2},      {"corr_history", 40},  {"corr_min_history", 20},
          {"indicators", {"raw", "rsi", "macd"}}, {"top_k", 3}};
}

struct Workspace {
  fs::path root;
  Options base;

  explicit Workspace(const std::string& name) {
    root = fs::temp_directory_path() / ("estimate_pipeline_" + name);
    fs::remove_all(root);
    fs::create_directories(root);
    synthetic::MarketConfig mc;
    mc.stocks = 6;
    mc.days = 180;
    mc.industries = 2;
    auto panel = synthetic::synthetic_market(mc);
    market::write_ohlcv(root / "ohlcv.csv", panel);
    market::write_metadata(root / "meta.csv", panel);
    std::ofstream(root / "config.json") << tiny_config().dump(2);
    base.data = root / "ohlcv.csv";
    base.meta = root / "meta.csv";
    base.config = root / "config.json";
    base.out = root / "run";
  }

  int run(const std::string& command, std::optional<std::string> ablation = std::nullopt) {
    auto o = base;
    o.command = command;
    o.ablation = ablation;
    std::ostringstream log, err;
    return run_pipeline(o, log, err);
  }

  void run_all(const std::string& ablation = "full") {
    for (const auto& c : commands()) REQUIRE(run(c, ablation) == 0);
  }
};

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config round trip and strict keys") {
    auto cfg = config_from_json(tiny_config());
    CHECK(cfg.model.temporal.hidden == 4);
    CHECK(cfg.indicators.enabled.size() == 3);
    auto again = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(again) == config_to_json(cfg));
    CHECK_THROWS_AS(config_from_json({{"learning_rat", 0.1}}), Error);
    CHECK_THROWS_AS(config_from_json({{"hidden", "wide"}}), Error);
    CHECK_THROWS_AS(config_from_json({{"phase_unit", "weeks"}}), Error);
  }

  TEST_CASE("usage and ordering errors map to exit codes") {
    Workspace ws("errors");
    CHECK(ws.run("fly") == 1);
    CHECK(ws.run("train") == 3);
    CHECK(ws.run("ingest", "est7") == 1);
    auto bad = ws.base;
    bad.command = "ingest";
    bad.data = ws.root / "missing.csv";
    std::ostringstream log, err;
    CHECK(run_pipeline(bad, log, err) != 0);
    try {
      bad.data = ws.base.data;
      bad.command = "train";
      run_stage(bad, log);
      FAIL("train without features should throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UpstreamArtifactMissing);
    }
  }

  TEST_CASE("full run writes the artifacts and is reproducible") {
    Workspace a("run_a"), b("run_b");
    a.run_all();
    b.run_all();
    const auto report = a.base.out / "full" / "report" / "report.csv";
    REQUIRE(fs::exists(report));
    CHECK(slurp(report) == slurp(b.base.out / "full" / "report" / "report.csv"));
    CHECK(fs::exists(a.base.out / "full" / "checkpoints" / "phase_01.json"));
    CHECK(fs::exists(a.base.out / "full" / "report" / "equity" / "phase_02.csv"));
    auto manifest = json::parse(slurp(a.base.out / "manifest.json"));
    for (const auto& c : commands()) CHECK(manifest["stages"].contains(c));
    CHECK(manifest["stages"]["train"]["ablation"]["fourier_basis"] == false);
    const auto text = slurp(report);
    CHECK(text.rfind("metric,phase,value\n", 0) == 0);
    for (auto name : {"Return,", "IC,", "ICIR,", "Rank_IC,", "Rank_ICIR,", "Prec@3,"}) {
      CHECK(text.find(std::string("\n") + name + "mean,") != std::string::npos);
    }
  }

  TEST_CASE("Fourier ablation is recorded in the manifest") {
    Workspace ws("est4");
    for (auto c : {"ingest", "features", "graph", "train"}) REQUIRE(ws.run(c, "est4") == 0);
    auto manifest = json::parse(slurp(ws.base.out / "manifest.json"));
    CHECK(manifest["stages"]["train"]["ablation"]["fourier_basis"] == true);
    CHECK(fs::exists(ws.base.out / "est4" / "checkpoints" / "phase_02.json"));
  }

  TEST_CASE("an empty report is refused") {
    backtest::BacktestReport rep;
    market::OhlcvPanel panel;
    CHECK_THROWS_AS(emit_report(rep, panel, fs::temp_directory_path() / "estimate_empty_report"), Error);
  }
}
