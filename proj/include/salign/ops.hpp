#pragma once

#include "salign/tensor.hpp"

namespace salign::ops {

inline constexpr double kLayerNormEps = 1e-6;

enum class Elementwise { add, mul, relu, sigmoid };

/// Same-shape elementwise op; `b` is ignored for unary kinds.
Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor scale(const Tensor& x, double factor);

/// Sum / mean of all entries as a (1,1,1,1) tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Depthwise separable 3x3 convolution parameters.
///   depthwise: (C, 1, 3, 3), pointwise: (C_out, C, 1, 1), bias: (1, C_out, 1, 1)
struct DConvWeights {
  Tensor depthwise;
  Tensor pointwise;
  Tensor bias;
};

/// Per-channel 3x3 cross-correlation, stride 1, zero padding 1.
Tensor depthwise3x3(const Tensor& x, const Tensor& kernel);

/// Position-wise channel map: y[:, o, p] = bias[o] + sum_i matrix[o, i] * x[:, i, p].
/// `matrix` is (C_out, C_in, 1, 1); `bias` is (1, C_out, 1, 1) or undefined.
Tensor linear_pointwise(const Tensor& x, const Tensor& matrix, const Tensor& bias);

/// Depthwise 3x3 followed by the pointwise mix. Preserves H x W.
Tensor dconv3(const Tensor& x, const DConvWeights& w);

/// Normalizes each (b, h, w) channel vector to zero mean and unit variance
/// (biased, eps = 1e-6), then applies per-channel gain and offset of shape (1, C, 1, 1).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset);

/// s * relu(x)^2 + b with scalar tensors s and b.
Tensor star_relu(const Tensor& x, const Tensor& s, const Tensor& b);

/// Global average pooling to (B, C, 1, 1).
Tensor gap(const Tensor& x);

/// Stacks b's channels after a's.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Nearest-neighbour x2 upsampling.
Tensor upsample2(const Tensor& x);

/// Non-overlapping k x k convolution with stride k. weight: (C_out, C_in, k, k).
Tensor patch_conv(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Softmax over consecutive groups of `group` channels of a (B, G*group, 1, 1) tensor.
Tensor group_softmax(const Tensor& x, std::int64_t group);

}  // namespace salign::ops
