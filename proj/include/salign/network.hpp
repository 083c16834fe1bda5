#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "salign/params.hpp"
#include "salign/saf.hpp"
#include "salign/scal.hpp"
#include "salign/tensor.hpp"

namespace salign {

inline constexpr int kLevels = 4;

struct ModelConfig {
  std::int64_t input_size = 128;
  std::array<std::int64_t, kLevels> encoder_channels{16, 32, 64, 128};
  scal::ScalConfig scal;
  std::int64_t filters = 4;
  std::int64_t ffn_expansion = 2;
  double beta1 = 1.0;
  double beta2 = 1.0;
  /// Ablation switches: drop the alignment loss / replace SAF by elementwise addition.
  bool use_scal = true;
  bool use_saf = true;

  static constexpr std::array<std::int64_t, kLevels> kStrides{4, 8, 16, 32};

  void validate() const;
  std::int64_t level_side(int level) const { return input_size / kStrides[level]; }
};

/// Four feature maps, finest first.
using Pyramid = std::array<Tensor, kLevels>;

struct EncoderStage {
  Tensor down_weight;
  Tensor down_bias;
  NormParams down_norm;
  StarReluParams down_act;
  struct Block {
    NormParams norm;
    StarReluParams act;
    ops::DConvWeights conv;
  };
  std::array<Block, 2> blocks;
};

/// Depthwise-separable conv -> layer_norm -> ReLU.
struct DnrLayer {
  ops::DConvWeights conv;
  NormParams norm;

  Tensor apply(const Tensor& x) const;
};

struct ModelOutput {
  Tensor logits;  // (B, 1, S, S)
  Pyramid rgb;
  Pyramid thermal;
  Pyramid fused;
  Pyramid decoded;
};

struct LossTerms {
  Tensor total;
  Tensor bce;
  Tensor iou;
  Tensor scal;  // (1,1,1,1) zero constant when the alignment loss is disabled
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// Shared-weight encoder applied to one (B, 3, S, S) image.
  Pyramid encode(const Tensor& image) const;
  Pyramid fuse(const Pyramid& rgb, const Pyramid& thermal) const;
  Pyramid decode(const Pyramid& fused) const;
  /// dconv3 to one channel, then x4 nearest upsampling.
  Tensor head(const Tensor& f1d) const;

  ModelOutput forward(const Tensor& rgb, const Tensor& thermal) const;

  /// compress() of the deepest pyramid level with the model's parameters.
  scal::CompressedPair compress(const Tensor& f4_rgb, const Tensor& f4_thermal) const;

  LossTerms losses(const ModelOutput& out, const Tensor& gt) const;

  ParamList parameters() const;

  const std::array<EncoderStage, kLevels>& encoder() const { return encoder_; }
  std::array<saf::SafParams, kLevels>& saf_blocks() { return saf_; }
  std::array<DnrLayer, kLevels>& decoder_layers() { return decoder_; }
  ops::DConvWeights& head_conv() { return head_; }

 private:
  ModelConfig config_;
  std::array<EncoderStage, kLevels> encoder_;
  std::array<saf::SafParams, kLevels> saf_;
  std::array<DnrLayer, kLevels> decoder_;
  ops::DConvWeights head_;
  scal::CompressParams compress_rgb_;
  scal::CompressParams compress_thermal_;
};

/// Closed-form parameter count for a configuration.
std::int64_t parameter_count(const ModelConfig& config);

/// Mean stable-logit binary cross entropy. gt must lie in [0, 1].
Tensor bce_loss(const Tensor& logits, const Tensor& gt);

/// Soft IoU loss, 1 - (sum p g + 1) / (sum (p + g - p g) + 1), per image, averaged over the batch.
Tensor iou_loss(const Tensor& logits, const Tensor& gt);

/// beta1 * bce + beta2 * iou + scal.
Tensor total_loss(const Tensor& bce, const Tensor& iou, const Tensor& scal, double beta1, double beta2);

}  // namespace salign
