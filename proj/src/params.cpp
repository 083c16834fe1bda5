#include "salign/params.hpp"

#include <cmath>

namespace salign {

Tensor init::normal(Shape shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.mutable_data()) v = dist(rng);
  t.set_requires_grad(true);
  return t;
}

Tensor init::constant(Shape shape, double value) {
  Tensor t = Tensor::full(shape, value);
  t.set_requires_grad(true);
  return t;
}

ops::DConvWeights init::dconv(std::int64_t c_in, std::int64_t c_out, Rng& rng) {
  return {normal({c_in, 1, 3, 3}, 1.0 / 3.0, rng),
          normal({c_out, c_in, 1, 1}, 1.0 / std::sqrt(static_cast<double>(c_in)), rng),
          constant({1, c_out, 1, 1}, 0.0)};
}

NormParams NormParams::make(std::int64_t channels) {
  return {init::constant({1, channels, 1, 1}, 1.0), init::constant({1, channels, 1, 1}, 0.0)};
}

Tensor NormParams::apply(const Tensor& x) const { return ops::layer_norm(x, gain, offset); }

void NormParams::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".gain", gain);
  out.emplace_back(prefix + ".offset", offset);
}

StarReluParams StarReluParams::make() {
  return {init::constant({1, 1, 1, 1}, kDefaultScale), init::constant({1, 1, 1, 1}, kDefaultBias)};
}

Tensor StarReluParams::apply(const Tensor& x) const { return ops::star_relu(x, s, b); }

void StarReluParams::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".scale", s);
  out.emplace_back(prefix + ".bias", b);
}

void collect_dconv(const ops::DConvWeights& w, ParamList& out, const std::string& prefix) {
  out.emplace_back(prefix + ".depthwise", w.depthwise);
  out.emplace_back(prefix + ".pointwise", w.pointwise);
  out.emplace_back(prefix + ".bias", w.bias);
}

std::int64_t dconv_param_count(std::int64_t c_in, std::int64_t c_out) { return 9 * c_in + c_out * c_in + c_out; }

std::int64_t count_parameters(const ParamList& params) {
  std::int64_t total = 0;
  for (const auto& [name, t] : params) total += t.numel();
  return total;
}

}  // namespace salign
