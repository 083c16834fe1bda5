#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "salign/ops.hpp"
#include "salign/tensor.hpp"

namespace salign::scal {

/// Which modality supplies the anchor element; the other supplies the k x k window.
enum class Anchor { thermal, rgb };

struct ScalConfig {
  int k = 3;
  double t = 0.4;
  /// 0 selects default_compressed_channels() of the incoming feature width.
  std::int64_t c_compressed = 0;
  double epsilon = 1e-8;
  Anchor anchor = Anchor::thermal;

  void validate() const;
  std::int64_t compressed_channels(std::int64_t feature_channels) const;
};

/// C/4, floored at 2 so the cosine similarity is not a sign function.
std::int64_t default_compressed_channels(std::int64_t feature_channels);

/// Per-modality channel compression: dconv3 to c_compressed channels, then layer_norm.
struct CompressParams {
  ops::DConvWeights conv;
  Tensor gain;
  Tensor offset;
  /// When false the layer_norm stage is skipped (oracle wiring only).
  bool normalize = true;
};

struct CompressedPair {
  Tensor rgb;
  Tensor thermal;
};

CompressedPair compress(const Tensor& f4_rgb, const Tensor& f4_thermal, const CompressParams& rgb,
                        const CompressParams& thermal);

/// k x k window of `f` centred on (i, j), row-major, zero outside the map.
/// Layout: [b][c][u] with u in [0, k*k).
std::vector<double> extract_patch(const Tensor& f, std::int64_t i, std::int64_t j, int k);

/// a.p / (|a| |p| + epsilon); exactly 0 when either vector is zero.
double cosine_sim(std::span<const double> a, std::span<const double> p, double epsilon = 1e-8);

/// 1 iff s > t.
int label(double s, double t);

/// Loss contribution of one anchor: -sum_u l_u log softmax(s)_u.
double info_nce(std::span<const double> s, std::span<const int> labels);

/// Cosine similarities and labels for every anchor position, layout [b][i][j][u].
struct SimilarityField {
  std::int64_t batch = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;
  int window = 0;
  std::vector<double> s;
  std::vector<int> l;
};

SimilarityField similarity_field(const CompressedPair& pair, const ScalConfig& cfg);

/// Windowed InfoNCE over all anchor positions, averaged over batch and positions.
/// Gradients reach both maps through the similarities; labels are constants.
Tensor scal_loss(const CompressedPair& pair, const ScalConfig& cfg);

}  // namespace salign::scal
