#pragma once

// Market hypergraph construction, spectral preparation and the hypergraph
// convolution layers (wavelet polynomial and exact Fourier variants).

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "estimate/market_data.hpp"
#include "estimate/tensor.hpp"

namespace estimate::hypergraph {

using ad::Tensor;

enum class EdgeSource { Industry, Correlation, Singleton };
const char* to_string(EdgeSource s);

struct Hyperedge {
  std::vector<std::size_t> members;  // sorted stock indices
  double weight = 0.0;
  EdgeSource source = EdgeSource::Industry;
  std::string label;
};

struct Hypergraph {
  std::size_t n = 0;
  std::vector<Hyperedge> edges;

  std::size_t edge_count() const { return edges.size(); }
  Eigen::MatrixXd incidence() const;  // n x |E|, 0/1
  Eigen::VectorXd weights() const;
  void validate() const;
};

/// Per-stock capitalization used for edge weights. Missing market caps fall
/// back to mean dollar volume (close x volume) over `fallback_window`.
std::vector<double> capitalization(const market::OhlcvPanel& panel, market::DayRange fallback_window);

/// Weight of an edge: member capitalization share of the whole universe.
double cap_share(const std::vector<std::size_t>& members, const std::vector<double>& caps);

/// One hyperedge per industry label; stocks left uncovered get singletons.
Hypergraph build_industry_hypergraph(const std::vector<std::string>& industries, const std::vector<double>& caps);

struct CorrelationConfig {
  std::size_t max_lag = 5;
  double threshold = 0.6;
  std::size_t min_cluster = 2;
  std::size_t history = 252;
  std::size_t min_history = 60;
};

struct LeadLag {
  double rho = 0.0;
  int lag = 0;  // b follows a by `lag` days when positive
};

/// max over lag in [-L, L] of corr(a[t], b[t + lag]) on the overlapping part.
LeadLag lead_lag_score(const std::vector<double>& a, const std::vector<double>& b, std::size_t max_lag);

/// Connected components of the thresholded lead-lag graph as new hyperedges,
/// using closes in the trailing window that ends (exclusive) at `end_day`.
std::vector<Hyperedge> augment_with_correlation(const market::OhlcvPanel& panel, std::size_t end_day,
                                                const std::vector<double>& caps, const CorrelationConfig& cfg = {});

struct SpectralCache {
  Eigen::VectorXd vertex_degree;  // Dv diagonal
  Eigen::VectorXd edge_degree;    // De diagonal
  Eigen::MatrixXd theta;          // Dv^-1/2 A W De^-1 A^T Dv^-1/2
  Eigen::MatrixXd laplacian;      // I - theta
  std::optional<Eigen::VectorXd> eigenvalues;
  std::optional<Eigen::MatrixXd> eigenvectors;
};

SpectralCache spectral_prepare(const Hypergraph& h);
void compute_eigenbasis(SpectralCache& cache);

/// U diag(exp(-s lambda)) U^T from the Laplacian eigenbasis.
Eigen::MatrixXd heat_kernel(SpectralCache& cache, double scale);

/// Truncated heat series coefficients theta_k = s^k e^-s / k!, k = 0..K.
std::vector<double> heat_series_coefficients(double scale, std::size_t order);

Tensor to_tensor(const Eigen::MatrixXd& m);
Eigen::MatrixXd to_matrix(const Tensor& t);

/// Exact spectral layer: LReLU(filter * Z * P) with a precomputed filter.
Tensor fourier_hconv(const Tensor& z, const Eigen::MatrixXd& filter, const Tensor& p);

/// Polynomial layer: LReLU(sum_k theta_k Theta_hat^k Z P), where Theta_hat is
/// rebuilt from the (possibly attention-weighted) incidence `incidence`
/// (n x |E|) and edge weights. Powers are applied as repeated products.
Tensor wavelet_hconv(const Tensor& z, const Tensor& incidence, const Eigen::VectorXd& edge_weights,
                     const Tensor& p, const Tensor& theta);

/// Applies Theta_hat once to y (n x d).
Tensor apply_theta(const Tensor& y, const Tensor& incidence, const Eigen::VectorXd& edge_weights);

/// Attention-weighted incidence: for incident (i, e), softmax over i's edges of
/// LReLU(a_node . (P x_i) + a_edge . (P x_e)), x_e the mean of member rows.
/// `a` has shape (2 * d_out, 1). Non-incident entries are exactly 0.
Tensor hyperedge_attention(const Tensor& z, const Eigen::MatrixXd& incidence, const Tensor& p, const Tensor& a);

/// Z = W2 LReLU(W1 [Z_T || Z_H] + b1) + b2, one scalar per stock. Z_H may be
/// undefined (hypergraph branch disabled).
Tensor predict_head(const Tensor& z_t, const Tensor& z_h, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                    const Tensor& b2);

}  // namespace estimate::hypergraph
