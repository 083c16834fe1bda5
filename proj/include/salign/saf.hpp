#pragma once

#include <cstdint>

#include "salign/fourier.hpp"
#include "salign/params.hpp"
#include "salign/tensor.hpp"

namespace salign::saf {

/// N learnable global filters over one level's half spectrum plus the
/// position-wise head whose pooled output selects per-channel filter mixtures.
struct SpectralFilterBank {
  /// (N, 1, H, 2*(W/2+1)), interleaved re/im.
  Tensor filters;
  std::int64_t origin_width = 0;
  /// (N*C, C, 1, 1) and (1, N*C, 1, 1).
  Tensor head_weight;
  Tensor head_bias;

  std::int64_t count() const { return filters.shape().n; }
  std::int64_t height() const { return filters.shape().h; }
  std::int64_t channels() const { return head_weight.shape().c; }

  /// Complex Gaussian filters (std 0.02 per component), head ~ N(0, 1/C), zero head bias.
  static SpectralFilterBank make(std::int64_t channels, std::int64_t height, std::int64_t width, std::int64_t count,
                                 Rng& rng);
  /// Overwrites every filter bin with `value`.
  void fill_filters(fourier::cplx value);
  void collect(ParamList& out, const std::string& prefix) const;
};

struct FfnParams {
  Tensor expand_weight;
  Tensor expand_bias;
  ops::DConvWeights conv;
  StarReluParams act;
  Tensor reduce_weight;
  Tensor reduce_bias;
};

struct SafParams {
  NormParams norm_rgb;
  NormParams norm_thermal;
  StarReluParams mixer_act;
  SpectralFilterBank bank;
  NormParams norm_ffn;
  FfnParams ffn;

  static SafParams make(std::int64_t channels, std::int64_t height, std::int64_t width, std::int64_t filters,
                        std::int64_t expansion, Rng& rng);
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Closed-form learnable parameter count of one block.
std::int64_t parameter_count(std::int64_t channels, std::int64_t height, std::int64_t width, std::int64_t filters,
                             std::int64_t expansion);

/// LayerNorm_r(f_r) + LayerNorm_t(f_t).
Tensor fuse_inputs(const Tensor& f_rgb, const Tensor& f_thermal, const SafParams& params);

/// Per-channel filter mixture weights, (B, C*N, 1, 1); entry c*N + n is the
/// softmax over n of gap(linear_pointwise(fa)).
Tensor egf_weights(const Tensor& fa, const SpectralFilterBank& bank);

/// G_hat[b, c] = sum_n weights[b, c*N + n] * G_n.
fourier::SpectralTensor synthesize_filters(const Tensor& weights, const SpectralFilterBank& bank);

/// irfft2(G_hat * rfft2(star_relu(fa))).
Tensor egf_forward(const Tensor& fa, const SpectralFilterBank& bank, const StarReluParams& act);

/// expand -> dconv3 -> StarReLU -> reduce.
Tensor ffn_forward(const Tensor& x, const FfnParams& ffn);

/// Two-residual block: z = fa + EGF(fa); out = z + FFN(LayerNorm(z)).
Tensor saf_block(const Tensor& f_rgb, const Tensor& f_thermal, const SafParams& params);

}  // namespace salign::saf
