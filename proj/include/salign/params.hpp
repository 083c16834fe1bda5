#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "salign/ops.hpp"
#include "salign/tensor.hpp"

namespace salign {

/// Ordered (name, tensor) pairs. Order is the checkpoint order.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

using Rng = std::mt19937_64;

namespace init {

Tensor normal(Shape shape, double stddev, Rng& rng);
Tensor constant(Shape shape, double value);

/// Depthwise kernels ~ N(0, 1/9), pointwise ~ N(0, 1/c_in), zero bias.
ops::DConvWeights dconv(std::int64_t c_in, std::int64_t c_out, Rng& rng);

}  // namespace init

/// Per-channel affine parameters of a layer_norm.
struct NormParams {
  Tensor gain;
  Tensor offset;

  static NormParams make(std::int64_t channels);
  Tensor apply(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Learnable StarReLU scalars, initialized to s = 0.8944, b = -0.4472.
struct StarReluParams {
  static constexpr double kDefaultScale = 0.8944;
  static constexpr double kDefaultBias = -0.4472;
  Tensor s;
  Tensor b;

  static StarReluParams make();
  Tensor apply(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

void collect_dconv(const ops::DConvWeights& w, ParamList& out, const std::string& prefix);
std::int64_t dconv_param_count(std::int64_t c_in, std::int64_t c_out);

std::int64_t count_parameters(const ParamList& params);

}  // namespace salign
