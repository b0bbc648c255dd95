#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "estimate/indicators.hpp"
#include "estimate/tensor.hpp"

namespace testsupport {

inline estimate::ad::Tensor random_tensor(estimate::ad::Shape shape, std::mt19937_64& rng, double scale = 1.0,
                                          bool requires_grad = false) {
  std::normal_distribution<double> n01(0.0, scale);
  std::vector<double> v(estimate::ad::shape_size(shape));
  for (auto& x : v) x = n01(rng);
  return estimate::ad::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Random but internally consistent OHLCV bars.
inline estimate::indicators::PriceSeries random_series(std::size_t n, std::mt19937_64& rng, double flat_prob = 0.0) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  estimate::indicators::PriceSeries s;
  double c = 50.0 + 50.0 * u(rng);
  for (std::size_t t = 0; t < n; ++t) {
    const double prev = c;
    if (u(rng) >= flat_prob) c = std::max(1.0, c * (1.0 + 0.03 * n01(rng)));
    const double o = u(rng) < flat_prob ? prev : prev * (1.0 + 0.01 * n01(rng));
    const double hi = std::max(o, c) * (1.0 + (u(rng) < flat_prob ? 0.0 : 0.01 * u(rng)));
    const double lo = std::min(o, c) * (1.0 - (u(rng) < flat_prob ? 0.0 : 0.01 * u(rng)));
    s.open.push_back(o);
    s.high.push_back(hi);
    s.low.push_back(lo);
    s.close.push_back(c);
    s.volume.push_back(u(rng) < flat_prob ? 0.0 : std::round(1e5 + 1e6 * u(rng)));
  }
  return s;
}

}  // namespace testsupport
