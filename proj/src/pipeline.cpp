#include "estimate/pipeline.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "estimate/digest.hpp"
#include "estimate/error.hpp"

#ifndef ESTIMATE_VERSION
#define ESTIMATE_VERSION "0.0.0"
#endif

extern char** environ;

namespace estimate::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string phase_tag(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "phase_%02d", id);
  return buf;
}

// Writes to a sibling temp file and renames, so readers never see a partial file.
void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out << bytes;
    if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::UpstreamArtifactMissing, "missing artifact " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoFailure, path.string() + ": " + e.what());
  }
}

void require(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::UpstreamArtifactMissing,
                path.string() + " not found; run `" + stage + "` first");
  }
}

struct Layout {
  fs::path root;
  fs::path panel() const { return root / "panel.csv"; }
  fs::path meta() const { return root / "meta.csv"; }
  fs::path features() const { return root / "features.csv"; }
  fs::path graphs() const { return root / "graphs.json"; }
  fs::path manifest() const { return root / "manifest.json"; }
  fs::path variant(const model::AblationFlags& f) const { return root / f.name(); }
  fs::path checkpoint(const model::AblationFlags& f, int phase) const {
    return variant(f) / "checkpoints" / (phase_tag(phase) + ".json");
  }
  fs::path predictions(const model::AblationFlags& f, int phase) const {
    return variant(f) / "predictions" / (phase_tag(phase) + ".csv");
  }
  fs::path backtest(const model::AblationFlags& f) const { return variant(f) / "backtest.json"; }
  fs::path report_dir(const model::AblationFlags& f) const { return variant(f) / "report"; }
};

struct Context {
  Options opts;
  RunConfig cfg;
  std::string config_hash;
  Layout layout;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::ostream* log = nullptr;
};

Context make_context(const Options& opts, std::ostream& log) {
  Context ctx;
  ctx.opts = opts;
  ctx.log = &log;
  ctx.cfg = opts.config.empty() ? config_from_json(json::object()) : load_config(opts.config);
  if (!opts.config.empty()) ctx.inputs.push_back(opts.config);
  if (opts.seed) ctx.cfg.train.seed = *opts.seed;
  if (opts.ablation) ctx.cfg.train.ablation = model::AblationFlags::parse(*opts.ablation);
  if (opts.repeats) ctx.cfg.repeats = *opts.repeats;
  ctx.cfg.validate();
  ctx.config_hash = sha256_hex(config_to_json(ctx.cfg).dump());
  ctx.layout.root = opts.out;
  return ctx;
}

market::OhlcvPanel load_run_panel(Context& ctx) {
  require(ctx.layout.panel(), "ingest");
  auto panel = market::load_ohlcv(ctx.layout.panel());
  ctx.inputs.push_back(ctx.layout.panel());
  if (fs::exists(ctx.layout.meta())) {
    market::attach_metadata(panel, market::load_metadata(ctx.layout.meta()));
    ctx.inputs.push_back(ctx.layout.meta());
  }
  return panel;
}

std::vector<market::PhaseSplit> selected_phases(const Context& ctx, const market::OhlcvPanel& panel) {
  const std::size_t days = panel.days();
  auto phases = market::make_rolling_phases(panel.calendar, ctx.cfg.phases);
  if (ctx.cfg.max_phases > 0 && phases.size() > ctx.cfg.max_phases) phases.resize(ctx.cfg.max_phases);
  if (phases.empty()) {
    throw Error(ErrorCode::CalendarTooShort, "calendar of " + std::to_string(days) + " days holds no full phase");
  }
  if (ctx.opts.phase) {
    const int id = *ctx.opts.phase;
    if (id < 1 || static_cast<std::size_t>(id) > phases.size()) {
      throw Error(ErrorCode::InvalidArgument, "--phase " + std::to_string(id) + " outside 1.." +
                                                  std::to_string(phases.size()));
    }
    return {phases[static_cast<std::size_t>(id - 1)]};
  }
  return phases;
}

void write_manifest(const Context& ctx, const std::string& started) {
  json manifest = fs::exists(ctx.layout.manifest()) ? read_json(ctx.layout.manifest()) : json::object();
  manifest["version"] = ESTIMATE_VERSION;
  json inputs = json::object();
  for (const auto& p : ctx.inputs) inputs[p.string()] = sha256_file(p);
  json outputs = json::object();
  for (const auto& p : ctx.outputs) outputs[p.string()] = sha256_file(p);
  const auto& f = ctx.cfg.train.ablation;
  manifest["stages"][ctx.opts.command] = {
      {"config", config_to_json(ctx.cfg)},
      {"config_sha256", ctx.config_hash},
      {"ablation",
       {{"no_hypergraph", f.no_hypergraph},
        {"no_dgf", f.no_dgf},
        {"no_corr_augment", f.no_corr_augment},
        {"fourier_basis", f.fourier_basis}}},
      {"inputs", inputs},
      {"outputs", outputs},
      {"started", started},
      {"finished", utc_now()},
  };
  write_file(ctx.layout.manifest(), manifest.dump(2) + "\n");
}

// ---- stages ----------------------------------------------------------------

void stage_ingest(Context& ctx) {
  if (ctx.opts.data.empty()) throw Error(ErrorCode::ConfigInvalid, "ingest needs --data");
  auto panel = market::load_ohlcv(ctx.opts.data);
  ctx.inputs.push_back(ctx.opts.data);
  if (!ctx.opts.meta.empty()) {
    market::attach_metadata(panel, market::load_metadata(ctx.opts.meta));
    ctx.inputs.push_back(ctx.opts.meta);
  }
  for (const auto& w : panel.warnings) *ctx.log << "warning: " << w.symbol << ": " << w.reason << "\n";
  fs::create_directories(ctx.layout.root);
  market::write_ohlcv(ctx.layout.panel(), panel);
  ctx.outputs.push_back(ctx.layout.panel());
  if (!panel.meta.empty()) {
    market::write_metadata(ctx.layout.meta(), panel);
    ctx.outputs.push_back(ctx.layout.meta());
  }
  *ctx.log << "ingested " << panel.stocks() << " symbols over " << panel.days() << " days\n";
}

void stage_features(Context& ctx) {
  const auto panel = load_run_panel(ctx);
  const auto features = indicators::assemble_features(panel, ctx.cfg.indicators);
  const auto& raw = features.raw;
  std::ostringstream out;
  out << "date,symbol";
  for (const auto& c : raw.channel_names) out << ',' << c;
  out << '\n';
  for (std::size_t t = 0; t < raw.days; ++t)
    for (std::size_t s = 0; s < raw.stocks; ++s) {
      out << market::format_date(panel.calendar[t]) << ',' << panel.symbols[s];
      for (std::size_t c = 0; c < raw.channels; ++c) out << ',' << num(raw.at(s, t, c));
      out << '\n';
    }
  write_file(ctx.layout.features(), out.str());
  ctx.outputs.push_back(ctx.layout.features());
  *ctx.log << "features: " << raw.channels << " channels\n";
}

void stage_graph(Context& ctx) {
  const auto panel = load_run_panel(ctx);
  json doc = {{"phases", json::array()}};
  for (const auto& phase : selected_phases(ctx, panel)) {
    const auto g = training::build_phase_graphs(panel, phase, !ctx.cfg.train.ablation.no_corr_augment,
                                                ctx.cfg.correlation);
    doc["phases"].push_back({{"phase", phase.phase_id},
                             {"train", hypergraph_to_json(g.train, panel)},
                             {"test", hypergraph_to_json(g.test, panel)}});
    *ctx.log << phase_tag(phase.phase_id) << ": " << g.train.edge_count() << " train edges, "
             << g.test.edge_count() << " test edges\n";
  }
  write_file(ctx.layout.graphs(), doc.dump(2) + "\n");
  ctx.outputs.push_back(ctx.layout.graphs());
}

void spawn_workers(Context& ctx, const std::vector<market::PhaseSplit>& phases) {
  if (ctx.opts.executable.empty()) throw Error(ErrorCode::InvalidArgument, "parallel phases need the executable path");
  std::vector<pid_t> running;
  auto reap = [&](pid_t pid) {
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      throw Error(ErrorCode::IoFailure, "phase worker failed with status " + std::to_string(status));
    }
  };
  for (const auto& phase : phases) {
    std::vector<std::string> args{ctx.opts.executable.string(), "train", "--out", ctx.opts.out.string(),
                                  "--phase", std::to_string(phase.phase_id), "--seed",
                                  std::to_string(ctx.cfg.train.seed), "--ablation", ctx.cfg.train.ablation.name()};
    if (!ctx.opts.config.empty()) {
      args.push_back("--config");
      args.push_back(ctx.opts.config.string());
    }
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    if (running.size() >= ctx.opts.parallel_phases) {
      reap(running.front());
      running.erase(running.begin());
    }
    pid_t pid = 0;
    if (posix_spawn(&pid, argv[0], nullptr, nullptr, argv.data(), environ) != 0) {
      throw Error(ErrorCode::IoFailure, "cannot spawn phase worker");
    }
    running.push_back(pid);
  }
  for (auto pid : running) reap(pid);
}

struct PhaseModel {
  training::Checkpoint checkpoint;
  bool reused = false;
};

PhaseModel ensure_checkpoint(Context& ctx, const market::OhlcvPanel& panel, const training::Dataset& data,
                             const market::PhaseSplit& phase) {
  const auto path = ctx.layout.checkpoint(ctx.cfg.train.ablation, phase.phase_id);
  if (fs::exists(path)) {
    const auto doc = read_json(path);
    auto ckpt = training::Checkpoint::from_json(doc.at("checkpoint"));
    if (ckpt.config_hash == ctx.config_hash) return {std::move(ckpt), true};
  }
  *ctx.log << phase_tag(phase.phase_id) << ": training (" << ctx.cfg.train.ablation.name() << ")\n";
  auto ckpt = training::train_phase(panel, data, phase, ctx.cfg.model, ctx.cfg.train, ctx.cfg.correlation,
                                    ctx.config_hash);
  json doc = {{"format", "estimate-checkpoint"},
              {"version", 1},
              {"phase", phase.phase_id},
              {"ablation", ctx.cfg.train.ablation.name()},
              {"seed", ctx.cfg.train.seed},
              {"checkpoint", ckpt.to_json()}};
  write_file(path, doc.dump() + "\n");
  ctx.outputs.push_back(path);
  *ctx.log << phase_tag(phase.phase_id) << ": best epoch " << ckpt.epoch << ", valid RMSE " << ckpt.valid_rmse
           << "\n";
  return {std::move(ckpt), false};
}

training::Dataset run_dataset(const Context& ctx, const market::OhlcvPanel& panel) {
  return training::make_dataset(panel, ctx.cfg.indicators, ctx.cfg.model.temporal.lookback, ctx.cfg.lookahead);
}

void stage_train(Context& ctx) {
  require(ctx.layout.features(), "features");
  require(ctx.layout.graphs(), "graph");
  const auto panel = load_run_panel(ctx);
  const auto phases = selected_phases(ctx, panel);
  if (ctx.opts.parallel_phases > 1 && phases.size() > 1) {
    spawn_workers(ctx, phases);
    for (const auto& p : phases) ctx.outputs.push_back(ctx.layout.checkpoint(ctx.cfg.train.ablation, p.phase_id));
    return;
  }
  const auto data = run_dataset(ctx, panel);
  for (const auto& phase : phases) {
    auto m = ensure_checkpoint(ctx, panel, data, phase);
    if (m.reused) *ctx.log << phase_tag(phase.phase_id) << ": checkpoint up to date\n";
  }
}

backtest::PhasePredictions predict_phase(Context& ctx, const market::OhlcvPanel& panel, const training::Dataset& data,
                                         const market::PhaseSplit& phase, const training::Checkpoint& ckpt) {
  model::EstimateModel m(ctx.cfg.model, ctx.cfg.train.ablation, panel.stocks(), ctx.cfg.train.seed);
  ad::parameters_from_json(ckpt.params, m.params());
  const auto graphs = training::build_phase_graphs(panel, phase, !ctx.cfg.train.ablation.no_corr_augment,
                                                   ctx.cfg.correlation);
  const auto context = model::make_graph_context(graphs.test, ctx.cfg.model, ctx.cfg.train.ablation);
  backtest::PhasePredictions out;
  out.phase = phase;
  for (std::size_t t = phase.test.begin; t < phase.test.end; ++t) {
    if (data.window_complete(t)) out.days.push_back(t);
  }
  out.scores = training::predict_days(m, data, context, out.days);
  std::ostringstream csv;
  csv << "date,symbol,score\n";
  for (std::size_t i = 0; i < out.days.size(); ++i)
    for (std::size_t s = 0; s < panel.stocks(); ++s) {
      csv << market::format_date(panel.calendar[out.days[i]]) << ',' << panel.symbols[s] << ','
          << num(out.scores[i][s]) << '\n';
    }
  const auto path = ctx.layout.predictions(ctx.cfg.train.ablation, phase.phase_id);
  write_file(path, csv.str());
  ctx.outputs.push_back(path);
  return out;
}

void stage_predict(Context& ctx) {
  const auto panel = load_run_panel(ctx);
  const auto data = run_dataset(ctx, panel);
  for (const auto& phase : selected_phases(ctx, panel)) {
    const auto path = ctx.layout.checkpoint(ctx.cfg.train.ablation, phase.phase_id);
    require(path, "train");
    ctx.inputs.push_back(path);
    const auto ckpt = training::Checkpoint::from_json(read_json(path).at("checkpoint"));
    predict_phase(ctx, panel, data, phase, ckpt);
  }
}

void stage_backtest(Context& ctx) {
  const auto panel = load_run_panel(ctx);
  const auto phases = selected_phases(ctx, panel);
  if (ctx.opts.parallel_phases > 1 && phases.size() > 1) spawn_workers(ctx, phases);
  const auto data = run_dataset(ctx, panel);
  std::vector<backtest::PhasePredictions> preds;
  for (const auto& phase : phases) {
    const auto m = ensure_checkpoint(ctx, panel, data, phase);
    preds.push_back(predict_phase(ctx, panel, data, phase, m.checkpoint));
  }
  const auto report = backtest::run_rolling_backtest(preds, panel, data.labels, ctx.cfg.risk, ctx.cfg.repeats,
                                                     ctx.cfg.train.seed);
  json doc = report_to_json(report, panel);
  doc["ablation"] = ctx.cfg.train.ablation.name();
  doc["config_sha256"] = ctx.config_hash;
  const auto path = ctx.layout.backtest(ctx.cfg.train.ablation);
  write_file(path, doc.dump(2) + "\n");
  ctx.outputs.push_back(path);
  for (const auto& p : report.phases) {
    *ctx.log << phase_tag(p.phase_id) << ": return " << p.ret << ", IC " << p.ic << ", Rank_IC " << p.rank_ic
             << ", Prec@" << report.prec_n << " " << p.prec_at_n << "\n";
  }
}

backtest::BacktestReport report_from_json(const json& j, const market::OhlcvPanel& panel) {
  backtest::BacktestReport r;
  auto metrics = [](const json& m) {
    backtest::PhaseMetrics p;
    p.phase_id = m.at("phase").get<int>();
    p.ret = m.at("return").get<double>();
    p.ic = m.at("ic").get<double>();
    p.icir = opt_from(m.at("icir"));
    p.rank_ic = m.at("rank_ic").get<double>();
    p.rank_icir = opt_from(m.at("rank_icir"));
    p.prec_at_n = m.at("prec_at_n").get<double>();
    p.test_days = m.at("test_days").get<std::size_t>();
    return p;
  };
  try {
    r.repeats = j.at("repeats").get<std::size_t>();
    r.prec_n = j.at("prec_n").get<std::size_t>();
    for (const auto& m : j.at("phases")) r.phases.push_back(metrics(m));
    r.mean = metrics(j.at("mean"));
    for (const auto& c : j.at("curves")) {
      backtest::EquityCurve curve;
      curve.days = c.at("day_index").get<std::vector<std::size_t>>();
      curve.nv = c.at("nv").get<std::vector<double>>();
      for (const auto& t : c.at("trades")) {
        backtest::Trade tr;
        tr.symbol = t.at("symbol").get<std::string>();
        tr.entry_day = t.at("entry_day").get<std::size_t>();
        tr.exit_day = t.at("exit_day").get<std::size_t>();
        tr.entry_price = t.at("entry_price").get<double>();
        tr.exit_price = t.at("exit_price").get<double>();
        const auto reason = t.at("reason").get<std::string>();
        for (auto e : {backtest::ExitReason::Stop, backtest::ExitReason::TakeProfit, backtest::ExitReason::Rebalance,
                       backtest::ExitReason::End}) {
          if (reason == backtest::to_string(e)) tr.reason = e;
        }
        curve.trades.push_back(tr);
      }
      for (auto d : curve.days) {
        if (d >= panel.days()) throw Error(ErrorCode::IoFailure, "equity curve day outside the calendar");
      }
      r.curves.push_back(std::move(curve));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoFailure, std::string("malformed backtest artifact: ") + e.what());
  }
  return r;
}

void stage_report(Context& ctx) {
  const auto panel = load_run_panel(ctx);
  const auto path = ctx.layout.backtest(ctx.cfg.train.ablation);
  require(path, "backtest");
  ctx.inputs.push_back(path);
  const auto report = report_from_json(read_json(path), panel);
  for (auto& p : emit_report(report, panel, ctx.layout.report_dir(ctx.cfg.train.ablation))) {
    ctx.outputs.push_back(p);
  }
  *ctx.log << "report written to " << ctx.layout.report_dir(ctx.cfg.train.ablation).string() << "\n";
}

}  // namespace

json hypergraph_to_json(const hypergraph::Hypergraph& h, const market::OhlcvPanel& panel) {
  json edges = json::array();
  for (const auto& e : h.edges) {
    json members = json::array();
    for (auto m : e.members) members.push_back(panel.symbols.at(m));
    edges.push_back({{"members", members},
                     {"weight", e.weight},
                     {"source", hypergraph::to_string(e.source)},
                     {"label", e.label}});
  }
  return {{"n", h.n}, {"edges", edges}};
}

json report_to_json(const backtest::BacktestReport& report, const market::OhlcvPanel& panel) {
  auto metrics = [](const backtest::PhaseMetrics& m) {
    return json{{"phase", m.phase_id},         {"return", m.ret},
                {"ic", m.ic},                  {"icir", opt_json(m.icir)},
                {"rank_ic", m.rank_ic},        {"rank_icir", opt_json(m.rank_icir)},
                {"prec_at_n", m.prec_at_n},    {"test_days", m.test_days}};
  };
  json phases = json::array();
  for (const auto& p : report.phases) phases.push_back(metrics(p));
  json curves = json::array();
  for (std::size_t i = 0; i < report.curves.size(); ++i) {
    const auto& c = report.curves[i];
    json dates = json::array();
    for (auto d : c.days) dates.push_back(market::format_date(panel.calendar.at(d)));
    json trades = json::array();
    for (const auto& t : c.trades) {
      trades.push_back({{"symbol", t.symbol},
                        {"entry_day", t.entry_day},
                        {"exit_day", t.exit_day},
                        {"entry_price", t.entry_price},
                        {"exit_price", t.exit_price},
                        {"reason", backtest::to_string(t.reason)}});
    }
    curves.push_back({{"phase", i < report.phases.size() ? report.phases[i].phase_id : 0},
                      {"day_index", c.days},
                      {"date", dates},
                      {"nv", c.nv},
                      {"trades", trades}});
  }
  return {{"repeats", report.repeats}, {"prec_n", report.prec_n}, {"phases", phases},
          {"mean", metrics(report.mean)}, {"curves", curves}};
}

std::vector<fs::path> emit_report(const backtest::BacktestReport& report, const market::OhlcvPanel& panel,
                                  const fs::path& dir) {
  if (report.phases.empty()) throw Error(ErrorCode::InvalidArgument, "report has no phases");
  if (report.curves.size() != report.phases.size()) {
    throw Error(ErrorCode::InvalidArgument, "report needs one equity curve per phase");
  }
  std::vector<std::pair<fs::path, std::string>> files;

  std::ostringstream csv;
  csv << "metric,phase,value\n";
  const std::string prec = "Prec@" + std::to_string(report.prec_n);
  using Getter = std::optional<double> (*)(const backtest::PhaseMetrics&);
  const std::vector<std::pair<std::string, Getter>> blocks{
      {"Return", [](const backtest::PhaseMetrics& m) -> std::optional<double> { return m.ret; }},
      {"IC", [](const backtest::PhaseMetrics& m) -> std::optional<double> { return m.ic; }},
      {"ICIR", [](const backtest::PhaseMetrics& m) { return m.icir; }},
      {"Rank_IC", [](const backtest::PhaseMetrics& m) -> std::optional<double> { return m.rank_ic; }},
      {"Rank_ICIR", [](const backtest::PhaseMetrics& m) { return m.rank_icir; }},
      {prec, [](const backtest::PhaseMetrics& m) -> std::optional<double> { return m.prec_at_n; }},
  };
  for (const auto& [name, get] : blocks) {
    for (const auto& p : report.phases) {
      const auto v = get(p);
      csv << name << ',' << p.phase_id << ',' << (v ? num(*v) : "") << '\n';
    }
    const auto v = get(report.mean);
    csv << name << ",mean," << (v ? num(*v) : "") << '\n';
  }
  files.emplace_back(dir / "report.csv", csv.str());
  files.emplace_back(dir / "report.json", report_to_json(report, panel).dump(2) + "\n");

  std::ostringstream cumulative;
  cumulative << "phase,day,cumulative_return\n";
  for (std::size_t i = 0; i < report.phases.size(); ++i) {
    const auto& c = report.curves[i];
    std::ostringstream eq;
    eq << "day,nv\n";
    for (std::size_t k = 0; k < c.days.size(); ++k) {
      const auto date = market::format_date(panel.calendar.at(c.days[k]));
      eq << date << ',' << num(c.nv[k]) << '\n';
      cumulative << report.phases[i].phase_id << ',' << date << ',' << num(c.nv[k] - 1.0) << '\n';
    }
    files.emplace_back(dir / "equity" / (phase_tag(report.phases[i].phase_id) + ".csv"), eq.str());
  }
  files.emplace_back(dir / "cumulative_returns.csv", cumulative.str());

  // Stage everything first so a failure leaves no partial report behind.
  std::vector<fs::path> staged;
  try {
    for (const auto& [path, bytes] : files) {
      fs::create_directories(path.parent_path());
      const fs::path tmp = path.string() + ".tmp";
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
      staged.push_back(tmp);
      out << bytes;
      out.close();
      if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + tmp.string());
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& tmp : staged) fs::remove(tmp, ec);
    throw;
  }
  std::vector<fs::path> written;
  for (const auto& [path, bytes] : files) {
    fs::rename(path.string() + ".tmp", path);
    written.push_back(path);
  }
  return written;
}

void run_stage(const Options& opts, std::ostream& log) {
  const auto& known = commands();
  if (std::find(known.begin(), known.end(), opts.command) == known.end()) {
    throw Error(ErrorCode::UnknownCommand, "unknown command '" + opts.command + "'");
  }
  if (opts.parallel_phases == 0) throw Error(ErrorCode::InvalidArgument, "--parallel-phases must be >= 1");
  const auto started = utc_now();
  auto ctx = make_context(opts, log);
  if (opts.command == "ingest") stage_ingest(ctx);
  else if (opts.command == "features") stage_features(ctx);
  else if (opts.command == "graph") stage_graph(ctx);
  else if (opts.command == "train") stage_train(ctx);
  else if (opts.command == "predict") stage_predict(ctx);
  else if (opts.command == "backtest") stage_backtest(ctx);
  else stage_report(ctx);
  write_manifest(ctx, started);
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->code()) {
      case ErrorCode::UnknownCommand:
      case ErrorCode::ConfigInvalid:
      case ErrorCode::InvalidArgument:
        return 1;
      default:
        return is_data_error(err->code()) ? 2 : 3;
    }
  }
  return 3;
}

int run_pipeline(const Options& opts, std::ostream& log, std::ostream& err) {
  try {
    run_stage(opts, log);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace estimate::pipeline
