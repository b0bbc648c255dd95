#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "estimate/backtest.hpp"
#include "estimate/error.hpp"
#include "estimate/hypergraph.hpp"
#include "estimate/indicators.hpp"
#include "estimate/pipeline.hpp"

namespace py = pybind11;
using namespace estimate;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const Array& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

Array to_array(const Eigen::MatrixXd& m) {
  Array out({m.rows(), m.cols()});
  auto r = out.mutable_unchecked<2>();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r(i, j) = m(i, j);
  return out;
}

Eigen::MatrixXd to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Eigen::MatrixXd m(a.shape(0), a.shape(1));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = r(i, j);
  return m;
}

std::vector<std::vector<double>> to_rows(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  std::vector<std::vector<double>> rows(a.shape(0));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) rows[i].push_back(r(i, j));
  return rows;
}

indicators::PriceSeries series(const Array& open, const Array& high, const Array& low, const Array& close,
                               const Array& volume) {
  indicators::PriceSeries s{to_vec(open), to_vec(high), to_vec(low), to_vec(close), to_vec(volume)};
  const auto n = s.close.size();
  if (s.open.size() != n || s.high.size() != n || s.low.size() != n || s.volume.size() != n)
    throw py::value_error("price arrays differ in length");
  return s;
}

hypergraph::Hypergraph graph_from(const Array& incidence, const Array& weights) {
  const auto a = to_matrix(incidence);
  const auto w = to_vec(weights);
  if (static_cast<std::size_t>(a.cols()) != w.size()) throw py::value_error("one weight per hyperedge expected");
  hypergraph::Hypergraph h;
  h.n = a.rows();
  for (Eigen::Index e = 0; e < a.cols(); ++e) {
    hypergraph::Hyperedge edge;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (a(i, e) != 0) edge.members.push_back(i);
    edge.weight = w[e];
    h.edges.push_back(edge);
  }
  return h;
}

py::object optional_float(const std::optional<double>& v) { return v ? py::object(py::float_(*v)) : py::none(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stock movement prediction with hypergraph wavelets: core routines";
  m.attr("__version__") = ESTIMATE_VERSION;

  py::register_exception<Error>(m, "EstimateError", PyExc_RuntimeError);

  // indicators
  m.def("sma", [](const Array& x, std::size_t n) { return to_array(indicators::sma(to_vec(x), n)); }, py::arg("values"),
        py::arg("n"));
  m.def("ema", [](const Array& x, std::size_t n) { return to_array(indicators::ema(to_vec(x), n)); }, py::arg("values"),
        py::arg("n"));
  m.def("rsi", [](const Array& c, std::size_t n) { return to_array(indicators::rsi(to_vec(c), n)); }, py::arg("close"),
        py::arg("n") = 14);
  m.def(
      "macd", [](const Array& c, std::size_t s, std::size_t l) { return to_array(indicators::macd(to_vec(c), s, l)); },
      py::arg("close"), py::arg("short") = 12, py::arg("long") = 26);
  m.def(
      "stochastic",
      [](const Array& o, const Array& h, const Array& l, const Array& c, const Array& v, std::size_t n) {
        return to_array(indicators::stochastic(series(o, h, l, c, v), n));
      },
      py::arg("open"), py::arg("high"), py::arg("low"), py::arg("close"), py::arg("volume"), py::arg("n") = 14);
  m.def(
      "mfi",
      [](const Array& o, const Array& h, const Array& l, const Array& c, const Array& v, std::size_t n) {
        return to_array(indicators::mfi(series(o, h, l, c, v), n));
      },
      py::arg("open"), py::arg("high"), py::arg("low"), py::arg("close"), py::arg("volume"), py::arg("n") = 14);
  m.def(
      "atr",
      [](const Array& o, const Array& h, const Array& l, const Array& c, const Array& v, std::size_t n) {
        return to_array(indicators::atr(series(o, h, l, c, v), n));
      },
      py::arg("open"), py::arg("high"), py::arg("low"), py::arg("close"), py::arg("volume"), py::arg("n") = 14);
  m.def(
      "adx",
      [](const Array& o, const Array& h, const Array& l, const Array& c, const Array& v, std::size_t n) {
        return to_array(indicators::trend_adx(series(o, h, l, c, v), n).adx);
      },
      py::arg("open"), py::arg("high"), py::arg("low"), py::arg("close"), py::arg("volume"), py::arg("n") = 14);
  m.def(
      "bollinger",
      [](const Array& o, const Array& h, const Array& l, const Array& c, const Array& v, std::size_t n, double k) {
        auto b = indicators::bollinger(series(o, h, l, c, v), n, k);
        return py::make_tuple(to_array(b.lower), to_array(b.middle), to_array(b.upper));
      },
      py::arg("open"), py::arg("high"), py::arg("low"), py::arg("close"), py::arg("volume"), py::arg("n") = 20,
      py::arg("m") = 2.0);
  m.def(
      "obv",
      [](const Array& o, const Array& h, const Array& l, const Array& c, const Array& v) {
        return to_array(indicators::obv(series(o, h, l, c, v)));
      },
      py::arg("open"), py::arg("high"), py::arg("low"), py::arg("close"), py::arg("volume"));

  // hypergraph spectra
  m.def(
      "hypergraph_operator",
      [](const Array& incidence, const Array& weights) {
        auto c = hypergraph::spectral_prepare(graph_from(incidence, weights));
        return py::make_tuple(to_array(c.theta), to_array(c.laplacian));
      },
      py::arg("incidence"), py::arg("weights"), "Returns (Theta, Laplacian) for an n x |E| incidence matrix.");
  m.def(
      "heat_kernel",
      [](const Array& incidence, const Array& weights, double scale) {
        auto c = hypergraph::spectral_prepare(graph_from(incidence, weights));
        return to_array(hypergraph::heat_kernel(c, scale));
      },
      py::arg("incidence"), py::arg("weights"), py::arg("scale") = 1.0);
  m.def("heat_series_coefficients", &hypergraph::heat_series_coefficients, py::arg("scale"), py::arg("order"));
  m.def(
      "heat_series_filter",
      [](const Array& incidence, const Array& weights, double scale, std::size_t order) {
        const auto c = hypergraph::spectral_prepare(graph_from(incidence, weights));
        const auto theta = hypergraph::heat_series_coefficients(scale, order);
        Eigen::MatrixXd power = Eigen::MatrixXd::Identity(c.theta.rows(), c.theta.cols());
        Eigen::MatrixXd acc = theta[0] * power;
        for (std::size_t k = 1; k <= order; ++k) {
          power = power * c.theta;
          acc += theta[k] * power;
        }
        return to_array(acc);
      },
      py::arg("incidence"), py::arg("weights"), py::arg("scale") = 1.0, py::arg("order") = 3);

  // metrics
  m.def(
      "ic_metrics",
      [](const Array& pred, const Array& actual) {
        auto r = backtest::ic_metrics(to_rows(pred), to_rows(actual));
        py::dict d;
        d["ic"] = r.ic;
        d["icir"] = optional_float(r.icir);
        d["rank_ic"] = r.rank_ic;
        d["rank_icir"] = optional_float(r.rank_icir);
        d["days_used"] = r.days_used;
        d["skipped_days"] = r.skipped_days;
        return d;
      },
      py::arg("pred"), py::arg("actual"), "Rows are days, columns stocks.");
  m.def(
      "prec_at_n", [](const Array& p, const Array& a, std::size_t n) { return backtest::prec_at_n(to_vec(p), to_vec(a), n); },
      py::arg("pred"), py::arg("actual"), py::arg("n"));

  // simulator
  m.def(
      "simulate_portfolio",
      [](const Array& open, const Array& high, const Array& low, const Array& close, const std::vector<std::size_t>& days,
         const Array& scores, double trailing_stop, double take_profit, std::size_t top_k, double cost) {
        const auto o = to_rows(open), h = to_rows(high), l = to_rows(low), c = to_rows(close);
        const auto s = to_rows(scores);
        if (s.size() != days.size()) throw py::value_error("one score row per signal day expected");
        market::OhlcvPanel panel;
        const std::size_t n = c.size(), t = c.empty() ? 0 : c[0].size();
        panel.calendar.resize(t);
        panel.bars.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          panel.symbols.push_back("S" + std::to_string(i));
          for (std::size_t k = 0; k < t; ++k) panel.bars[i].push_back({{}, o[i][k], h[i][k], l[i][k], c[i][k], 0.0});
        }
        std::vector<backtest::Signal> signals;
        for (std::size_t i = 0; i < days.size(); ++i) signals.push_back({days[i], s[i]});
        backtest::RiskConfig risk;
        risk.trailing_stop = trailing_stop;
        risk.take_profit = take_profit;
        risk.top_k = top_k;
        risk.cost = cost;
        auto curve = backtest::simulate_portfolio(signals, panel, {0, t}, risk);
        py::list trades;
        for (const auto& tr : curve.trades) {
          py::dict d;
          d["stock"] = std::stoul(tr.symbol.substr(1));
          d["entry_day"] = tr.entry_day;
          d["exit_day"] = tr.exit_day;
          d["entry_price"] = tr.entry_price;
          d["exit_price"] = tr.exit_price;
          d["reason"] = backtest::to_string(tr.reason);
          trades.append(d);
        }
        return py::make_tuple(to_array(curve.nv), trades);
      },
      py::arg("open"), py::arg("high"), py::arg("low"), py::arg("close"), py::arg("signal_days"), py::arg("scores"),
      py::arg("trailing_stop") = 0.07, py::arg("take_profit") = 0.20, py::arg("top_k") = 10, py::arg("cost") = 0.0,
      "Price arrays are stocks x days. Returns (net value per day, trades).");

  // phases and pipeline
  m.def(
      "rolling_phases",
      [](std::size_t days, double train, double valid, double test, std::size_t stride) {
        market::PhaseConfig cfg;
        cfg.train_months = train;
        cfg.valid_months = valid;
        cfg.test_months = test;
        cfg.stride_days = stride;
        py::list out;
        for (const auto& p : market::make_rolling_phases(days, cfg)) {
          py::dict d;
          d["phase"] = p.phase_id;
          d["train"] = py::make_tuple(p.train.begin, p.train.end);
          d["valid"] = py::make_tuple(p.valid.begin, p.valid.end);
          d["test"] = py::make_tuple(p.test.begin, p.test.end);
          out.append(d);
        }
        return out;
      },
      py::arg("days"), py::arg("train_months") = 10.0, py::arg("valid_months") = 2.0, py::arg("test_months") = 6.0,
      py::arg("stride_days") = 163);
  m.def("default_config", [] { return pipeline::config_to_json(pipeline::config_from_json(nlohmann::json::object())).dump(); },
        "Default run configuration as a JSON string.");
  m.def(
      "run_stage",
      [](const std::string& command, const std::string& out, const std::string& data, const std::string& meta,
         const std::string& config, std::optional<int> phase, std::optional<std::uint64_t> seed,
         std::optional<std::string> ablation) {
        pipeline::Options o;
        o.command = command;
        o.out = out;
        o.data = data;
        o.meta = meta;
        o.config = config;
        o.phase = phase;
        o.seed = seed;
        o.ablation = ablation;
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          pipeline::run_stage(o, log);
        }
        return log.str();
      },
      py::arg("command"), py::arg("out") = "run", py::arg("data") = "", py::arg("meta") = "", py::arg("config") = "",
      py::arg("phase") = py::none(), py::arg("seed") = py::none(), py::arg("ablation") = py::none(),
      "Runs one pipeline stage and returns its log; raises EstimateError on failure.");
}
