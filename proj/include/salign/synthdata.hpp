#pragma once

#include <array>
#include <cstdint>

#include "salign/tensor.hpp"

namespace salign::synth {

/// Planar affine map about the image centre c:
///   dst = c + [a11 a12; a21 a22] (src - c) + (tx, ty)
/// with x = column and y = row. Coefficient order: a11, a12, a21, a22, tx, ty.
struct Affine {
  std::array<double, 6> coeffs{1.0, 0.0, 0.0, 1.0, 0.0, 0.0};

  static Affine identity() { return {}; }
  static Affine translation(double tx, double ty) { return {{1.0, 0.0, 0.0, 1.0, tx, ty}}; }
  /// Rotation by `degrees`, isotropic scale, then translation.
  static Affine similarity(double degrees, double scale, double tx, double ty);

  double determinant() const { return coeffs[0] * coeffs[3] - coeffs[1] * coeffs[2]; }
  /// Throws ParameterError if |det| < 1e-6.
  Affine inverse() const;
};

struct SceneSpec {
  std::int64_t size = 128;
  int min_objects = 1;
  int max_objects = 3;
  double rgb_noise = 0.04;
  double thermal_noise = 0.02;
  double thermal_contrast_min = 0.35;
  double thermal_contrast_max = 0.6;
  double max_translation = 6.0;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double max_rotation_deg = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SamplePair {
  Tensor rgb;      // (1, 3, S, S)
  Tensor thermal;  // (1, 3, S, S), one temperature field replicated
  Tensor gt;       // (1, 1, S, S), {0, 1}, RGB frame
  Affine true_affine;
  int objects = 0;
};

/// Draws the misalignment for sample `index` of `spec`.
Affine sample_affine(const SceneSpec& spec, std::uint64_t index);

/// Deterministic in (spec.seed, index).
SamplePair gen_scene(const SceneSpec& spec, std::uint64_t index);

/// Same scene as gen_scene but with the thermal view warped by `affine`.
SamplePair render_scene(const SceneSpec& spec, std::uint64_t index, const Affine& affine);

/// Inverse-mapped bilinear warp of every plane of `img`; samples outside the
/// source read as 0.
Tensor affine_warp(const Tensor& img, const Affine& affine);

/// 4-connected components of `mask > 0.5` in plane (n, c).
int count_components(const Tensor& mask, std::int64_t n = 0, std::int64_t c = 0);

/// Centroid (x, y) of `plane > threshold`; NaN if empty.
std::array<double, 2> centroid(const Tensor& t, double threshold, std::int64_t n = 0, std::int64_t c = 0);

}  // namespace salign::synth
