#include "salign/saf.hpp"

#include <cmath>
#include <string>

#include "salign/errors.hpp"
#include "salign/flop_counter.hpp"

namespace salign::saf {

using autograd::grad_sink;
using autograd::should_record;
using fourier::SpectralTensor;

SpectralFilterBank SpectralFilterBank::make(std::int64_t channels, std::int64_t height, std::int64_t width,
                                            std::int64_t count, Rng& rng) {
  if (count < 1) throw ConfigError("filter count must be >= 1, got " + std::to_string(count));
  fourier::require_power_of_two(height, "filter height");
  fourier::require_power_of_two(width, "filter width");
  const std::int64_t bins = SpectralTensor::bins_for(width);
  SpectralFilterBank bank;
  bank.filters = init::normal({count, 1, height, 2 * bins}, 0.02, rng);
  bank.origin_width = width;
  bank.head_weight = init::normal({count * channels, channels, 1, 1}, 1.0 / std::sqrt(static_cast<double>(channels)), rng);
  bank.head_bias = init::constant({1, count * channels, 1, 1}, 0.0);
  return bank;
}

void SpectralFilterBank::fill_filters(fourier::cplx value) {
  auto v = filters.mutable_data();
  for (std::size_t i = 0; i < v.size(); i += 2) {
    v[i] = value.real();
    v[i + 1] = value.imag();
  }
}

void SpectralFilterBank::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".filters", filters);
  out.emplace_back(prefix + ".head.weight", head_weight);
  out.emplace_back(prefix + ".head.bias", head_bias);
}

SafParams SafParams::make(std::int64_t channels, std::int64_t height, std::int64_t width, std::int64_t filters,
                          std::int64_t expansion, Rng& rng) {
  if (expansion < 1) throw ConfigError("ffn expansion must be >= 1, got " + std::to_string(expansion));
  const std::int64_t hidden = expansion * channels;
  const double in_std = 1.0 / std::sqrt(static_cast<double>(channels));
  SafParams p;
  p.norm_rgb = NormParams::make(channels);
  p.norm_thermal = NormParams::make(channels);
  p.mixer_act = StarReluParams::make();
  p.bank = SpectralFilterBank::make(channels, height, width, filters, rng);
  p.norm_ffn = NormParams::make(channels);
  p.ffn.expand_weight = init::normal({hidden, channels, 1, 1}, in_std, rng);
  p.ffn.expand_bias = init::constant({1, hidden, 1, 1}, 0.0);
  p.ffn.conv = init::dconv(hidden, hidden, rng);
  p.ffn.act = StarReluParams::make();
  p.ffn.reduce_weight = init::normal({channels, hidden, 1, 1}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  p.ffn.reduce_bias = init::constant({1, channels, 1, 1}, 0.0);
  return p;
}

void SafParams::collect(ParamList& out, const std::string& prefix) const {
  norm_rgb.collect(out, prefix + ".norm_rgb");
  norm_thermal.collect(out, prefix + ".norm_thermal");
  mixer_act.collect(out, prefix + ".mixer_act");
  bank.collect(out, prefix + ".bank");
  norm_ffn.collect(out, prefix + ".norm_ffn");
  out.emplace_back(prefix + ".ffn.expand.weight", ffn.expand_weight);
  out.emplace_back(prefix + ".ffn.expand.bias", ffn.expand_bias);
  collect_dconv(ffn.conv, out, prefix + ".ffn.conv");
  ffn.act.collect(out, prefix + ".ffn.act");
  out.emplace_back(prefix + ".ffn.reduce.weight", ffn.reduce_weight);
  out.emplace_back(prefix + ".ffn.reduce.bias", ffn.reduce_bias);
}

std::int64_t parameter_count(std::int64_t channels, std::int64_t height, std::int64_t width, std::int64_t filters,
                             std::int64_t expansion) {
  const std::int64_t c = channels;
  const std::int64_t hidden = expansion * c;
  const std::int64_t norms = 3 * 2 * c;
  const std::int64_t activations = 2 * 2;
  const std::int64_t bank = filters * height * 2 * SpectralTensor::bins_for(width) + filters * c * c + filters * c;
  const std::int64_t ffn = (hidden * c + hidden) + dconv_param_count(hidden, hidden) + (c * hidden + c);
  return norms + activations + bank + ffn;
}

Tensor fuse_inputs(const Tensor& f_rgb, const Tensor& f_thermal, const SafParams& params) {
  if (!(f_rgb.shape() == f_thermal.shape())) {
    throw DimensionError("fuse_inputs: modality shapes differ " + f_rgb.shape().str() + " vs " +
                         f_thermal.shape().str());
  }
  return ops::add(params.norm_rgb.apply(f_rgb), params.norm_thermal.apply(f_thermal));
}

Tensor egf_weights(const Tensor& fa, const SpectralFilterBank& bank) {
  const Tensor logits = ops::gap(ops::linear_pointwise(fa, bank.head_weight, bank.head_bias));
  return ops::group_softmax(logits, bank.count());
}

SpectralTensor synthesize_filters(const Tensor& weights, const SpectralFilterBank& bank) {
  const Shape ws = weights.shape();
  const std::int64_t n_filters = bank.count();
  if (ws.h != 1 || ws.w != 1 || ws.c % n_filters != 0) {
    throw DimensionError("synthesize_filters: weights " + ws.str() + " do not split into groups of " +
                         std::to_string(n_filters));
  }
  const std::int64_t channels = ws.c / n_filters;
  const Shape fs = bank.filters.shape();
  const std::int64_t plane = fs.h * fs.w;  // real entries per filter
  SpectralTensor out = SpectralTensor::zeros({ws.n, channels, fs.h, fs.w / 2}, bank.origin_width);
  auto y = out.values.mutable_data();
  auto w = weights.data();
  auto g = bank.filters.data();
  for (std::int64_t b = 0; b < ws.n; ++b) {
    for (std::int64_t c = 0; c < channels; ++c) {
      double* dst = y.data() + (b * channels + c) * plane;
      for (std::int64_t n = 0; n < n_filters; ++n) {
        const double wv = w[b * ws.c + c * n_filters + n];
        const double* src = g.data() + n * plane;
        for (std::int64_t i = 0; i < plane; ++i) dst[i] += wv * src[i];
      }
    }
  }
  flops::add(flops::cost::mix_filters(ws.n, channels, n_filters, plane / 2));

  Tensor wt = weights;
  Tensor filters = bank.filters;
  if (should_record({&wt, &filters})) {
    out.values.set_requires_grad(true);
    Tape::current()->record(
        "synthesize_filters", {wt, filters}, out.values,
        [wt, filters, ws, channels, n_filters, plane](std::span<const double> gout) mutable {
          auto gw = grad_sink(wt);
          auto gf = grad_sink(filters);
          auto w = wt.data();
          auto g = filters.data();
          for (std::int64_t b = 0; b < ws.n; ++b) {
            for (std::int64_t c = 0; c < channels; ++c) {
              const double* gy = gout.data() + (b * channels + c) * plane;
              for (std::int64_t n = 0; n < n_filters; ++n) {
                const std::int64_t wi = b * ws.c + c * n_filters + n;
                const double* src = g.data() + n * plane;
                if (!gw.empty()) {
                  double acc = 0.0;
                  for (std::int64_t i = 0; i < plane; ++i) acc += gy[i] * src[i];
                  gw[wi] += acc;
                }
                if (!gf.empty()) {
                  for (std::int64_t i = 0; i < plane; ++i) gf[n * plane + i] += w[wi] * gy[i];
                }
              }
            }
          }
        });
  }
  return out;
}

Tensor egf_forward(const Tensor& fa, const SpectralFilterBank& bank, const StarReluParams& act) {
  const Shape s = fa.shape();
  if (s.h != bank.height() || s.w != bank.origin_width) {
    throw ConfigError("egf_forward: feature resolution " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                      " does not match filter bank " + std::to_string(bank.height()) + "x" +
                      std::to_string(bank.origin_width));
  }
  if (s.c != bank.channels()) {
    throw DimensionError("egf_forward: " + std::to_string(s.c) + " channels, bank expects " +
                         std::to_string(bank.channels()));
  }
  const SpectralTensor mixed = synthesize_filters(egf_weights(fa, bank), bank);
  const SpectralTensor signal = fourier::rfft2(act.apply(fa));
  return fourier::irfft2(fourier::complex_mul(mixed, signal));
}

Tensor ffn_forward(const Tensor& x, const FfnParams& ffn) {
  Tensor h = ops::linear_pointwise(x, ffn.expand_weight, ffn.expand_bias);
  h = ffn.act.apply(ops::dconv3(h, ffn.conv));
  return ops::linear_pointwise(h, ffn.reduce_weight, ffn.reduce_bias);
}

Tensor saf_block(const Tensor& f_rgb, const Tensor& f_thermal, const SafParams& params) {
  const Tensor fa = fuse_inputs(f_rgb, f_thermal, params);
  const Tensor z = ops::add(fa, egf_forward(fa, params.bank, params.mixer_act));
  return ops::add(z, ffn_forward(params.norm_ffn.apply(z), params.ffn));
}

}  // namespace salign::saf
