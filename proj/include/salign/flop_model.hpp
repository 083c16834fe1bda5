#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "salign/network.hpp"

namespace salign::flops {

/// Operation count of one frequency-domain mixer call, split by stage.
struct EgfCost {
  std::int64_t weights = 0;    // pointwise head, pooling, grouped softmax
  std::int64_t synthesis = 0;  // weighted sum of the filter bank
  std::int64_t activation = 0;
  std::int64_t fft = 0;  // forward and inverse 2-D transforms
  std::int64_t spectral_product = 0;

  std::int64_t total() const { return weights + synthesis + activation + fft + spectral_product; }
};

EgfCost egf_mixer(std::int64_t batch, std::int64_t channels, std::int64_t height, std::int64_t width,
                  std::int64_t filters);

struct BlockCost {
  std::string name;
  std::int64_t flops = 0;
};

/// Closed-form count of Model::forward for a batch, one row per block. Mirrors
/// the per-op costs the runtime counter records.
std::vector<BlockCost> model_forward(const ModelConfig& config, std::int64_t batch = 1);

std::int64_t total(std::span<const BlockCost> blocks);

struct ScalingRow {
  std::int64_t side = 0;
  std::int64_t channels = 0;
  EgfCost egf;
  std::int64_t attention = 0;
};

/// Mixer versus dense-attention cost at each square resolution, batch 1.
std::vector<ScalingRow> scaling_table(std::span<const std::int64_t> sides, std::int64_t channels,
                                      std::int64_t filters);

/// Runs one no-grad forward pass on zero inputs and returns the recorded count.
std::int64_t instrumented_forward(const ModelConfig& config, std::int64_t batch = 1, std::uint64_t seed = 0);

}  // namespace salign::flops
