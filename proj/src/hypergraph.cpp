#include "estimate/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "estimate/error.hpp"

namespace estimate::hypergraph {

const char* to_string(EdgeSource s) {
  switch (s) {
    case EdgeSource::Industry: return "industry";
    case EdgeSource::Correlation: return "correlation";
    case EdgeSource::Singleton: return "singleton";
  }
  return "unknown";
}

Eigen::MatrixXd Hypergraph::incidence() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(edges.size()));
  for (std::size_t e = 0; e < edges.size(); ++e)
    for (auto v : edges[e].members) a(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(e)) = 1.0;
  return a;
}

Eigen::VectorXd Hypergraph::weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t e = 0; e < edges.size(); ++e) w(static_cast<Eigen::Index>(e)) = edges[e].weight;
  return w;
}

void Hypergraph::validate() const {
  std::vector<int> covered(n, 0);
  for (const auto& e : edges) {
    if (e.members.empty()) throw Error(ErrorCode::InvalidArgument, "hyperedge without members");
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw Error(ErrorCode::InvalidArgument, "hyperedge weight must be finite and non-negative");
    }
    for (auto v : e.members) {
      if (v >= n) throw Error(ErrorCode::InvalidArgument, "hyperedge member out of range");
      covered[v] = 1;
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (!covered[v]) throw Error(ErrorCode::ZeroDegreeVertex, "stock " + std::to_string(v) + " is in no hyperedge");
  }
}

std::vector<double> capitalization(const market::OhlcvPanel& panel, market::DayRange fallback_window) {
  std::vector<double> caps(panel.stocks(), 0.0);
  const std::size_t end = std::min(fallback_window.end, panel.days());
  for (std::size_t s = 0; s < panel.stocks(); ++s) {
    if (s < panel.meta.size() && panel.meta[s].market_cap) {
      caps[s] = *panel.meta[s].market_cap;
      continue;
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t t = fallback_window.begin; t < end; ++t) {
      acc += panel.close(s, t) * panel.bar(s, t).volume;
      ++count;
    }
    caps[s] = count ? acc / static_cast<double>(count) : 0.0;
  }
  return caps;
}

double cap_share(const std::vector<std::size_t>& members, const std::vector<double>& caps) {
  const double total = std::accumulate(caps.begin(), caps.end(), 0.0);
  if (!(total > 0.0)) return 1.0 / static_cast<double>(std::max<std::size_t>(caps.size(), 1)) * members.size();
  double part = 0.0;
  for (auto m : members) part += caps[m];
  return part / total;
}

Hypergraph build_industry_hypergraph(const std::vector<std::string>& industries, const std::vector<double>& caps) {
  if (industries.size() != caps.size()) throw Error(ErrorCode::ShapeMismatch, "industries and caps differ in length");
  Hypergraph h;
  h.n = industries.size();
  std::map<std::string, std::vector<std::size_t>> groups;
  std::vector<int> covered(h.n, 0);
  for (std::size_t s = 0; s < h.n; ++s) {
    if (industries[s].empty()) continue;
    groups[industries[s]].push_back(s);
    covered[s] = 1;
  }
  for (auto& [label, members] : groups) {
    h.edges.push_back({members, cap_share(members, caps), EdgeSource::Industry, label});
  }
  for (std::size_t s = 0; s < h.n; ++s) {
    if (!covered[s]) h.edges.push_back({{s}, cap_share({s}, caps), EdgeSource::Singleton, ""});
  }
  h.validate();
  return h;
}

LeadLag lead_lag_score(const std::vector<double>& a, const std::vector<double>& b, std::size_t max_lag) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "lead-lag series differ in length");
  const auto len = static_cast<long>(a.size());
  LeadLag best{-2.0, 0};
  auto corr_at = [&](long lag) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    long count = 0;
    for (long t = 0; t < len; ++t) {
      const long u = t + lag;
      if (u < 0 || u >= len) continue;
      sa += a[t];
      sb += b[u];
      ++count;
    }
    if (count < 3) return 0.0;
    const double ma = sa / count, mb = sb / count;
    for (long t = 0; t < len; ++t) {
      const long u = t + lag;
      if (u < 0 || u >= len) continue;
      saa += (a[t] - ma) * (a[t] - ma);
      sbb += (b[u] - mb) * (b[u] - mb);
      sab += (a[t] - ma) * (b[u] - mb);
    }
    if (saa <= 0 || sbb <= 0) return 0.0;
    return sab / std::sqrt(saa * sbb);
  };
  // Search outward from lag 0 so ties resolve to the shortest lag.
  const long lmax = static_cast<long>(max_lag);
  for (long mag = 0; mag <= lmax; ++mag) {
    for (long lag : {mag, -mag}) {
      if (mag == 0 && lag < 0) continue;
      const double r = corr_at(lag);
      if (r > best.rho) best = {r, static_cast<int>(lag)};
    }
  }
  return best;
}

std::vector<Hyperedge> augment_with_correlation(const market::OhlcvPanel& panel, std::size_t end_day,
                                                const std::vector<double>& caps, const CorrelationConfig& cfg) {
  end_day = std::min(end_day, panel.days());
  if (end_day < cfg.min_history) {
    throw Error(ErrorCode::InsufficientHistory, "correlation needs " + std::to_string(cfg.min_history) +
                                                    " days of history, have " + std::to_string(end_day));
  }
  const std::size_t begin = end_day > cfg.history ? end_day - cfg.history : 0;
  const std::size_t n = panel.stocks();
  std::vector<std::vector<double>> returns(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = begin + 1; t < end_day; ++t) {
      returns[s].push_back(panel.close(s, t) / panel.close(s, t - 1) - 1.0);
    }
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (lead_lag_score(returns[i], returns[j], cfg.max_lag).rho >= cfg.threshold) parent[find(i)] = find(j);
    }
  std::map<std::size_t, std::vector<std::size_t>> comps;
  for (std::size_t v = 0; v < n; ++v) comps[find(v)].push_back(v);
  std::vector<Hyperedge> edges;
  for (auto& [root, members] : comps) {
    if (members.size() < std::max<std::size_t>(cfg.min_cluster, 2)) continue;
    edges.push_back({members, cap_share(members, caps), EdgeSource::Correlation,
                     "corr-" + std::to_string(edges.size())});
  }
  return edges;
}

SpectralCache spectral_prepare(const Hypergraph& h) {
  if (h.edges.empty()) throw Error(ErrorCode::ZeroDegreeVertex, "hypergraph has no edges");
  const Eigen::MatrixXd a = h.incidence();
  const Eigen::VectorXd w = h.weights();
  SpectralCache c;
  c.vertex_degree = a * w;
  c.edge_degree = a.colwise().sum().transpose();
  for (Eigen::Index v = 0; v < c.vertex_degree.size(); ++v) {
    if (!(c.vertex_degree(v) > 0.0)) {
      throw Error(ErrorCode::ZeroDegreeVertex, "vertex " + std::to_string(v) + " has zero weighted degree");
    }
  }
  const Eigen::VectorXd dv_isqrt = c.vertex_degree.array().rsqrt();
  const Eigen::MatrixXd b = dv_isqrt.asDiagonal() * a;
  const Eigen::VectorXd mid = w.array() / c.edge_degree.array();
  Eigen::MatrixXd theta = b * mid.asDiagonal() * b.transpose();
  c.theta = 0.5 * (theta + theta.transpose());
  c.laplacian = Eigen::MatrixXd::Identity(theta.rows(), theta.cols()) - c.theta;
  return c;
}

void compute_eigenbasis(SpectralCache& cache) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cache.laplacian);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::DecompositionFailed, "Laplacian eigensolver failed");
  cache.eigenvalues = solver.eigenvalues();
  cache.eigenvectors = solver.eigenvectors();
}

Eigen::MatrixXd heat_kernel(SpectralCache& cache, double scale) {
  if (!cache.eigenvalues) compute_eigenbasis(cache);
  const Eigen::VectorXd g = (-scale * cache.eigenvalues->array()).exp();
  return *cache.eigenvectors * g.asDiagonal() * cache.eigenvectors->transpose();
}

std::vector<double> heat_series_coefficients(double scale, std::size_t order) {
  // e^{-s Delta} = e^{-s} e^{s Theta} = sum_k (s^k e^{-s} / k!) Theta^k
  std::vector<double> theta(order + 1);
  double term = std::exp(-scale);
  for (std::size_t k = 0; k <= order; ++k) {
    if (k > 0) term *= scale / static_cast<double>(k);
    theta[k] = term;
  }
  return theta;
}

Tensor to_tensor(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  return Tensor::from({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v));
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
  if (t.rank() != 2) throw Error(ErrorCode::ShapeMismatch, "to_matrix needs rank 2");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.at(i, j);
  return m;
}

Tensor fourier_hconv(const Tensor& z, const Eigen::MatrixXd& filter, const Tensor& p) {
  if (static_cast<std::size_t>(filter.rows()) != z.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "spectral filter does not match stock count");
  }
  return ad::leaky_relu(ad::matmul(to_tensor(filter), ad::matmul(z, p)));
}

namespace {

struct ThetaOperator {
  Tensor incidence;
  Tensor incidence_t;
  Tensor dv_isqrt;  // (n, 1)
  Tensor edge_scale;  // (E, 1): w_e / De_e

  ThetaOperator(const Tensor& inc, const Eigen::VectorXd& edge_weights) : incidence(inc) {
    const std::size_t e = inc.dim(1);
    if (static_cast<std::size_t>(edge_weights.size()) != e) {
      throw Error(ErrorCode::ShapeMismatch, "edge weights do not match incidence columns");
    }
    std::vector<double> wv(edge_weights.data(), edge_weights.data() + e);
    auto w = Tensor::from({e, 1}, std::move(wv));
    incidence_t = ad::transpose(inc);
    const auto dv = ad::matmul(inc, w);
    for (double v : dv.data()) {
      if (!(v > 0.0)) throw Error(ErrorCode::ZeroDegreeVertex, "vertex with zero weighted degree");
    }
    dv_isqrt = ad::pow(dv, -0.5);
    edge_scale = ad::div(w, ad::transpose(ad::sum_axis(inc, 0)));
  }

  Tensor apply(const Tensor& y) const {
    auto u = ad::mul(y, dv_isqrt);
    auto v = ad::mul(ad::matmul(incidence_t, u), edge_scale);
    return ad::mul(ad::matmul(incidence, v), dv_isqrt);
  }
};

}  // namespace

Tensor apply_theta(const Tensor& y, const Tensor& incidence, const Eigen::VectorXd& edge_weights) {
  return ThetaOperator(incidence, edge_weights).apply(y);
}

Tensor wavelet_hconv(const Tensor& z, const Tensor& incidence, const Eigen::VectorXd& edge_weights, const Tensor& p,
                     const Tensor& theta) {
  if (incidence.rank() != 2 || incidence.dim(0) != z.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "incidence " + ad::shape_string(incidence.shape()) + " vs features " +
                                              ad::shape_string(z.shape()));
  }
  const std::size_t order = theta.size();
  if (order == 0) throw Error(ErrorCode::ShapeMismatch, "need at least one polynomial coefficient");
  auto coeffs = ad::reshape(theta, {1, order});
  ThetaOperator op(incidence, edge_weights);
  Tensor power = ad::matmul(z, p);
  Tensor acc = ad::mul(power, ad::slice(coeffs, 1, 0, 1));
  for (std::size_t k = 1; k < order; ++k) {
    power = op.apply(power);
    acc = ad::add(acc, ad::mul(power, ad::slice(coeffs, 1, k, 1)));
  }
  return ad::leaky_relu(acc);
}

Tensor hyperedge_attention(const Tensor& z, const Eigen::MatrixXd& incidence, const Tensor& p, const Tensor& a) {
  const std::size_t n = z.dim(0);
  const auto e = static_cast<std::size_t>(incidence.cols());
  if (static_cast<std::size_t>(incidence.rows()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "incidence rows do not match stock count");
  }
  const std::size_t d_out = p.dim(1);
  if (a.size() != 2 * d_out) throw Error(ErrorCode::ShapeMismatch, "attention vector must have 2 * d_out entries");
  Eigen::MatrixXd mean_op = incidence;
  for (Eigen::Index j = 0; j < incidence.cols(); ++j) {
    const double card = incidence.col(j).sum();
    if (card > 0) mean_op.col(j) /= card;
  }
  auto a_col = ad::reshape(a, {2 * d_out, 1});
  auto zp = ad::matmul(z, p);
  auto ep = ad::matmul(to_tensor(mean_op.transpose()), zp);
  auto node_score = ad::matmul(zp, ad::slice(a_col, 0, 0, d_out));
  auto edge_score = ad::matmul(ep, ad::slice(a_col, 0, d_out, d_out));
  auto logits = ad::leaky_relu(ad::add(node_score, ad::transpose(edge_score)));
  std::vector<double> mask(n * e);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < e; ++j)
      mask[i * e + j] = incidence(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return ad::masked_softmax_rows(logits, mask);
}

Tensor predict_head(const Tensor& z_t, const Tensor& z_h, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                    const Tensor& b2) {
  Tensor input = z_t;
  if (z_h.defined()) {
    if (z_h.dim(0) != z_t.dim(0)) throw Error(ErrorCode::ShapeMismatch, "Z_T and Z_H row counts differ");
    input = ad::concat({z_t, z_h}, 1);
  }
  if (w1.dim(0) != input.dim(1)) {
    throw Error(ErrorCode::ShapeMismatch, "head input width " + std::to_string(input.dim(1)) + " vs weights " +
                                              ad::shape_string(w1.shape()));
  }
  auto hidden = ad::leaky_relu(ad::add(ad::matmul(input, w1), b1));
  return ad::add(ad::matmul(hidden, w2), b2);
}

}  // namespace estimate::hypergraph
