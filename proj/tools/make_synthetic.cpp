// Writes the bundled synthetic dataset: OHLCV and metadata CSVs.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "estimate/error.hpp"
#include "estimate/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic OHLCV panel"};
  estimate::synthetic::MarketConfig cfg;
  std::string out = "data";
  app.add_option("--stocks", cfg.stocks)->capture_default_str();
  app.add_option("--days", cfg.days)->capture_default_str();
  app.add_option("--industries", cfg.industries)->capture_default_str();
  app.add_option("--seed", cfg.seed)->capture_default_str();
  app.add_option("--out", out, "output directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const auto panel = estimate::synthetic::synthetic_market(cfg);
    std::filesystem::create_directories(out);
    estimate::market::write_ohlcv(std::filesystem::path(out) / "ohlcv.csv", panel);
    estimate::market::write_metadata(std::filesystem::path(out) / "meta.csv", panel);
    std::cout << panel.stocks() << " stocks, " << panel.days() << " days -> " << out << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
