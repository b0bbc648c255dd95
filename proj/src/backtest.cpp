#include "estimate/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "estimate/error.hpp"

namespace estimate::backtest {

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;  // sample
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return m;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return m;
}

bool flat(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

std::optional<double> information_ratio(const std::vector<double>& daily) {
  const auto m = moments(daily);
  if (daily.size() < 2 || m.sd < 1e-12) return std::nullopt;
  return m.mean / m.sd;
}

}  // namespace

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::ShapeMismatch, "pearson needs equal lengths >= 2");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw Error(ErrorCode::DegenerateDay, "zero-variance cross-section");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(average_ranks(a), average_ranks(b));
}

IcMetrics ic_metrics(const std::vector<std::vector<double>>& pred, const std::vector<std::vector<double>>& actual) {
  if (pred.size() != actual.size()) throw Error(ErrorCode::ShapeMismatch, "ic_metrics: day counts differ");
  IcMetrics out;
  std::vector<double> ic, ric;
  for (std::size_t d = 0; d < pred.size(); ++d) {
    if (pred[d].size() != actual[d].size() || pred[d].size() < 3) {
      throw Error(ErrorCode::ShapeMismatch, "ic_metrics needs >= 3 aligned stocks per day");
    }
    if (flat(pred[d]) || flat(actual[d])) {
      out.skipped_days.push_back(d);
      continue;
    }
    ic.push_back(pearson(pred[d], actual[d]));
    ric.push_back(spearman(pred[d], actual[d]));
  }
  if (!out.skipped_days.empty()) {
    std::clog << "ic_metrics: skipped " << out.skipped_days.size() << " zero-variance day(s)\n";
  }
  if (ic.empty()) throw Error(ErrorCode::DegenerateDay, "every day has a zero-variance cross-section");
  out.days_used = ic.size();
  out.ic = moments(ic).mean;
  out.rank_ic = moments(ric).mean;
  out.icir = information_ratio(ic);
  out.rank_icir = information_ratio(ric);
  return out;
}

double prec_at_n(const std::vector<double>& pred, const std::vector<double>& actual, std::size_t n) {
  if (pred.size() != actual.size()) throw Error(ErrorCode::ShapeMismatch, "prec_at_n: lengths differ");
  if (n == 0 || n > pred.size()) throw Error(ErrorCode::InvalidArgument, "prec_at_n: N must be in [1, n]");
  std::vector<std::size_t> idx(pred.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return pred[i] > pred[j]; });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += actual[idx[i]] > 0.0;
  return static_cast<double>(hits) / static_cast<double>(n);
}

void RiskConfig::validate() const {
  if (!(trailing_stop > 0.0 && trailing_stop < 1.0)) throw Error(ErrorCode::ConfigInvalid, "trailing_stop in (0, 1)");
  if (!(take_profit > 0.0)) throw Error(ErrorCode::ConfigInvalid, "take_profit must be positive");
  if (top_k == 0) throw Error(ErrorCode::ConfigInvalid, "top_k must be >= 1");
  if (rebalance == 0) throw Error(ErrorCode::ConfigInvalid, "rebalance must be >= 1");
  if (!(cost >= 0.0 && cost < 1.0)) throw Error(ErrorCode::ConfigInvalid, "cost in [0, 1)");
  if (!(jitter >= 0.0 && jitter < 1.0)) throw Error(ErrorCode::ConfigInvalid, "jitter in [0, 1)");
}

const char* to_string(ExitReason r) {
  switch (r) {
    case ExitReason::Stop: return "stop";
    case ExitReason::TakeProfit: return "take_profit";
    case ExitReason::Rebalance: return "rebalance";
    case ExitReason::End: return "end";
  }
  return "unknown";
}

namespace {

struct Position {
  std::size_t stock = 0;
  std::size_t entry_day = 0;
  double entry = 0.0;
  double shares = 0.0;
  double peak = 0.0;
};

void check_bar(const market::OhlcvBar& b, const std::string& symbol, std::size_t day) {
  if (!(b.open > 0.0 && b.high > 0.0 && b.low > 0.0 && b.close > 0.0) || !std::isfinite(b.high)) {
    throw Error(ErrorCode::MissingPrice, "no usable price for " + symbol + " on day " + std::to_string(day));
  }
}

}  // namespace

EquityCurve simulate_portfolio(const std::vector<Signal>& signals, const market::OhlcvPanel& panel,
                               market::DayRange range, const RiskConfig& risk, std::uint64_t seed) {
  risk.validate();
  if (range.end > panel.days() || range.begin >= range.end) {
    throw Error(ErrorCode::MissingPrice, "simulation range outside the price calendar");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto fill = [&](double price) { return risk.jitter > 0.0 ? price * (1.0 + risk.jitter * unit(rng)) : price; };

  std::vector<const Signal*> pending(panel.days(), nullptr);
  for (const auto& s : signals) {
    if (s.scores.size() != panel.stocks()) throw Error(ErrorCode::ShapeMismatch, "signal width differs from panel");
    if (s.day + 1 < range.end && s.day + 1 >= range.begin) pending[s.day + 1] = &s;
  }

  EquityCurve curve;
  double cash = 1.0;
  std::vector<Position> book;
  auto close_position = [&](const Position& p, std::size_t day, double price, ExitReason why) {
    cash += p.shares * price * (1.0 - risk.cost);
    curve.trades.push_back({panel.symbols[p.stock], p.entry_day, day, p.entry, price, why});
  };

  for (std::size_t day = range.begin; day < range.end; ++day) {
    if (const Signal* sig = pending[day]) {
      for (const auto& p : book) {
        check_bar(panel.bar(p.stock, day), panel.symbols[p.stock], day);
        close_position(p, day, fill(panel.bar(p.stock, day).open), ExitReason::Rebalance);
      }
      book.clear();
      std::vector<std::size_t> idx(panel.stocks());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t i, std::size_t j) { return sig->scores[i] > sig->scores[j]; });
      const std::size_t k = std::min(risk.top_k, idx.size());
      const double alloc = cash / static_cast<double>(k);
      for (std::size_t i = 0; i < k; ++i) {
        const auto s = idx[i];
        check_bar(panel.bar(s, day), panel.symbols[s], day);
        const double price = fill(panel.bar(s, day).open);
        book.push_back({s, day, price, alloc * (1.0 - risk.cost) / price, price});
      }
      cash -= alloc * static_cast<double>(k);
    }
    std::vector<Position> kept;
    for (auto& p : book) {
      const auto& b = panel.bar(p.stock, day);
      check_bar(b, panel.symbols[p.stock], day);
      const double stop = p.peak * (1.0 - risk.trailing_stop);
      const double target = p.entry * (1.0 + risk.take_profit);
      if (b.low <= stop) {
        close_position(p, day, std::min(b.open, stop), ExitReason::Stop);
      } else if (b.high >= target) {
        close_position(p, day, std::max(b.open, target), ExitReason::TakeProfit);
      } else {
        p.peak = std::max(p.peak, b.close);
        kept.push_back(p);
      }
    }
    book = std::move(kept);
    double nv = cash;
    for (const auto& p : book) nv += p.shares * panel.close(p.stock, day);
    curve.days.push_back(day);
    curve.nv.push_back(nv);
  }
  const std::size_t last = range.end - 1;
  for (const auto& p : book) close_position(p, last, panel.close(p.stock, last), ExitReason::End);
  if (!book.empty()) curve.nv.back() = cash;
  return curve;
}

std::vector<Signal> rebalance_signals(const PhasePredictions& p, std::size_t every) {
  std::vector<Signal> out;
  if (every == 0) throw Error(ErrorCode::InvalidArgument, "rebalance cadence must be positive");
  for (std::size_t i = 0; i < p.days.size(); i += every) out.push_back({p.days[i], p.scores[i]});
  return out;
}

PhaseMetrics evaluate_phase(const PhasePredictions& p, const market::OhlcvPanel& panel,
                            const market::LabelTensor& labels, const RiskConfig& risk, std::size_t repeats,
                            std::uint64_t seed, EquityCurve* first_curve) {
  if (p.days.empty() || p.days.size() != p.scores.size()) {
    throw Error(ErrorCode::PhaseCheckpointMissing,
                "phase " + std::to_string(p.phase.phase_id) + " has no test predictions");
  }
  if (repeats == 0) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
  PhaseMetrics m;
  m.phase_id = p.phase.phase_id;
  std::vector<std::vector<double>> pred, actual;
  const std::size_t n = std::min(risk.top_k, panel.stocks());
  double prec = 0.0;
  for (std::size_t i = 0; i < p.days.size(); ++i) {
    const auto day = p.days[i];
    if (!labels.defined(day)) continue;
    std::vector<double> row(labels.stocks);
    for (std::size_t s = 0; s < labels.stocks; ++s) row[s] = labels.at(s, day);
    prec += prec_at_n(p.scores[i], row, n);
    pred.push_back(p.scores[i]);
    actual.push_back(std::move(row));
  }
  if (pred.empty()) throw Error(ErrorCode::DegenerateDay, "no test day has a realized label");
  m.test_days = pred.size();
  m.prec_at_n = prec / static_cast<double>(pred.size());
  const auto ic = ic_metrics(pred, actual);
  m.ic = ic.ic;
  m.icir = ic.icir;
  m.rank_ic = ic.rank_ic;
  m.rank_icir = ic.rank_icir;
  const auto signals = rebalance_signals(p, risk.rebalance);
  double ret = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    auto curve = simulate_portfolio(signals, panel, p.phase.test, risk, seed + r);
    ret += curve.total_return();
    if (r == 0 && first_curve) *first_curve = std::move(curve);
  }
  m.ret = ret / static_cast<double>(repeats);
  return m;
}

BacktestReport run_rolling_backtest(const std::vector<PhasePredictions>& phases, const market::OhlcvPanel& panel,
                                    const market::LabelTensor& labels, const RiskConfig& risk, std::size_t repeats,
                                    std::uint64_t seed) {
  if (phases.empty()) throw Error(ErrorCode::PhaseCheckpointMissing, "no phases to backtest");
  BacktestReport report;
  report.repeats = repeats;
  report.prec_n = std::min(risk.top_k, panel.stocks());
  std::vector<double> icir, ricir;
  for (const auto& p : phases) {
    EquityCurve curve;
    auto m = evaluate_phase(p, panel, labels, risk, repeats, seed, &curve);
    report.curves.push_back(std::move(curve));
    report.mean.ret += m.ret;
    report.mean.ic += m.ic;
    report.mean.rank_ic += m.rank_ic;
    report.mean.prec_at_n += m.prec_at_n;
    report.mean.test_days += m.test_days;
    if (m.icir) icir.push_back(*m.icir);
    if (m.rank_icir) ricir.push_back(*m.rank_icir);
    report.phases.push_back(m);
  }
  const double k = static_cast<double>(phases.size());
  report.mean.ret /= k;
  report.mean.ic /= k;
  report.mean.rank_ic /= k;
  report.mean.prec_at_n /= k;
  if (!icir.empty()) report.mean.icir = moments(icir).mean;
  if (!ricir.empty()) report.mean.rank_icir = moments(ricir).mean;
  return report;
}

}  // namespace estimate::backtest
