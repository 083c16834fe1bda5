#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

#include "salign/ops.hpp"
#include "salign/tensor.hpp"

namespace salign::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double stddev = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.mutable_data()) v = dist(rng);
  return t;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// sum(x * weights) with fixed random weights: a generic scalar probe of every output entry.
inline Tensor random_projection(const Tensor& x, std::uint64_t seed) {
  return ops::sum(ops::mul(x, random_tensor(x.shape(), seed)));
}

}  // namespace salign::testing
