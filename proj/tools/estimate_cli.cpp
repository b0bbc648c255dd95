#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "estimate/pipeline.hpp"

int main(int argc, char** argv) {
  using estimate::pipeline::Options;
  CLI::App app{"ESTIMATE stock movement prediction: data, training and rolling backtest"};
  app.set_version_flag("--version", ESTIMATE_VERSION);

  Options opts;
  std::string data, meta, config, out = "run";
  std::optional<int> phase;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ablation;
  std::optional<std::size_t> repeats;

  app.add_option("command", opts.command, "ingest | features | graph | train | predict | backtest | report")
      ->required();
  app.add_option("--data", data, "OHLCV CSV (date,symbol,open,high,low,close,volume)");
  app.add_option("--meta", meta, "metadata CSV (symbol,industry,market_cap)");
  app.add_option("--config", config, "JSON config file");
  app.add_option("--out", out, "run directory")->capture_default_str();
  app.add_option("--phase", phase, "restrict to one phase (1-based)");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--ablation", ablation, "full | est1 | est2 | est3 | est4");
  app.add_option("--repeats", repeats, "simulation repeats per phase");
  app.add_option("--parallel-phases", opts.parallel_phases, "train phases in N worker processes")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  opts.data = data;
  opts.meta = meta;
  opts.config = config;
  opts.out = out;
  opts.phase = phase;
  opts.seed = seed;
  opts.ablation = ablation;
  opts.repeats = repeats;
  std::error_code ec;
  opts.executable = std::filesystem::read_symlink("/proc/self/exe", ec);
  return estimate::pipeline::run_pipeline(opts, std::cout, std::cerr);
}
