#include "salign/flop_model.hpp"

#include <numeric>

#include "salign/flop_counter.hpp"
#include "salign/fourier.hpp"

namespace salign::flops {

namespace {

std::int64_t bins_for(std::int64_t width) { return fourier::SpectralTensor::bins_for(width); }

std::int64_t dconv(std::int64_t batch, std::int64_t c_in, std::int64_t c_out, std::int64_t plane) {
  return cost::depthwise3x3(batch * c_in * plane) + cost::pointwise(batch, c_in, c_out, plane, true);
}

std::int64_t encoder_stage(const ModelConfig& cfg, int level, std::int64_t batch) {
  const std::int64_t c = cfg.encoder_channels[level];
  const std::int64_t c_in = level == 0 ? 3 : cfg.encoder_channels[level - 1];
  const std::int64_t stride = level == 0 ? 4 : 2;
  const std::int64_t side = cfg.level_side(level);
  const std::int64_t plane = side * side;
  const std::int64_t numel = batch * c * plane;
  std::int64_t n = cost::patch_conv(batch, c_in, c, stride, plane) + cost::layer_norm(numel) + cost::star_relu(numel);
  for (int b = 0; b < 2; ++b) {
    n += cost::layer_norm(numel) + cost::star_relu(numel) + dconv(batch, c, c, plane) + cost::elementwise(numel);
  }
  return n;
}

std::int64_t saf_block(const ModelConfig& cfg, int level, std::int64_t batch) {
  const std::int64_t c = cfg.encoder_channels[level];
  const std::int64_t side = cfg.level_side(level);
  const std::int64_t plane = side * side;
  const std::int64_t numel = batch * c * plane;
  if (!cfg.use_saf) return cost::elementwise(numel);
  const std::int64_t hidden = cfg.ffn_expansion * c;
  const std::int64_t hidden_numel = batch * hidden * plane;
  std::int64_t n = 2 * cost::layer_norm(numel) + cost::elementwise(numel);
  n += egf_mixer(batch, c, side, side, cfg.filters).total() + cost::elementwise(numel);
  n += cost::layer_norm(numel);
  n += cost::pointwise(batch, c, hidden, plane, true) + dconv(batch, hidden, hidden, plane) +
       cost::star_relu(hidden_numel) + cost::pointwise(batch, hidden, c, plane, true);
  n += cost::elementwise(numel);
  return n;
}

std::int64_t decoder_layer(const ModelConfig& cfg, int level, std::int64_t batch) {
  const std::int64_t c = cfg.encoder_channels[level];
  const std::int64_t c_in = level == kLevels - 1 ? c : c + cfg.encoder_channels[level + 1];
  const std::int64_t side = cfg.level_side(level);
  const std::int64_t plane = side * side;
  const std::int64_t numel = batch * c * plane;
  return dconv(batch, c_in, c, plane) + cost::layer_norm(numel) + cost::elementwise(numel);
}

}  // namespace

EgfCost egf_mixer(std::int64_t batch, std::int64_t channels, std::int64_t height, std::int64_t width,
                  std::int64_t filters) {
  const std::int64_t plane = height * width;
  const std::int64_t spectral_plane = height * bins_for(width);
  const std::int64_t logits = batch * filters * channels;
  EgfCost e;
  e.weights = cost::pointwise(batch, channels, filters * channels, plane, true) + cost::gap(logits * plane) +
              cost::group_softmax(logits);
  e.synthesis = cost::mix_filters(batch, channels, filters, spectral_plane);
  e.activation = cost::star_relu(batch * channels * plane);
  e.fft = 2 * batch * channels * cost::fft2_plane(height, width);
  e.spectral_product = cost::complex_mul(batch * channels * spectral_plane);
  return e;
}

std::vector<BlockCost> model_forward(const ModelConfig& config, std::int64_t batch) {
  config.validate();
  std::vector<BlockCost> rows;
  for (int i = 0; i < kLevels; ++i) {
    rows.push_back({"encoder.stage" + std::to_string(i) + " (x2 modalities)", 2 * encoder_stage(config, i, batch)});
  }
  for (int i = 0; i < kLevels; ++i) {
    rows.push_back({(config.use_saf ? "saf" : "add") + std::to_string(i), saf_block(config, i, batch)});
  }
  for (int i = kLevels - 1; i >= 0; --i) {
    rows.push_back({"decoder" + std::to_string(i), decoder_layer(config, i, batch)});
  }
  rows.push_back({"head", dconv(batch, config.encoder_channels[0], 1, config.level_side(0) * config.level_side(0))});
  return rows;
}

std::int64_t total(std::span<const BlockCost> blocks) {
  return std::accumulate(blocks.begin(), blocks.end(), std::int64_t{0},
                         [](std::int64_t acc, const BlockCost& b) { return acc + b.flops; });
}

std::vector<ScalingRow> scaling_table(std::span<const std::int64_t> sides, std::int64_t channels,
                                      std::int64_t filters) {
  std::vector<ScalingRow> rows;
  for (std::int64_t side : sides) {
    rows.push_back({side, channels, egf_mixer(1, channels, side, side, filters), cost::attention_mixer(side, side, channels)});
  }
  return rows;
}

std::int64_t instrumented_forward(const ModelConfig& config, std::int64_t batch, std::uint64_t seed) {
  const Model model(config, seed);
  const Tensor image = Tensor::zeros({batch, 3, config.input_size, config.input_size});
  NoGradGuard no_grad;
  Scope scope;
  (void)model.forward(image, image);
  return scope.total();
}

}  // namespace salign::flops
