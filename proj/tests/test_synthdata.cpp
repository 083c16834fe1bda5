#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "salign/errors.hpp"
#include "salign/synthdata.hpp"
#include "test_util.hpp"

using namespace salign;
using synth::Affine;

namespace {

synth::SceneSpec aligned_clean_spec() {
  synth::SceneSpec spec;
  spec.rgb_noise = 0.0;
  spec.thermal_noise = 0.0;
  spec.max_translation = 0.0;
  spec.scale_min = spec.scale_max = 1.0;
  spec.max_rotation_deg = 0.0;
  spec.seed = 11;
  return spec;
}

// Background temperature never exceeds 0.25; objects start at 0.45.
constexpr double kHotThreshold = 0.35;

Tensor smooth_image(std::int64_t size) {
  Tensor t = Tensor::zeros({1, 1, size, size});
  const double s = static_cast<double>(size);
  for (std::int64_t y = 0; y < size; ++y) {
    for (std::int64_t x = 0; x < size; ++x) {
      const double u = 2.0 * std::numbers::pi * static_cast<double>(x) / s;
      const double v = 2.0 * std::numbers::pi * static_cast<double>(y) / s;
      t.at(0, 0, y, x) = 0.5 + 0.25 * std::sin(u) * std::cos(v) + 0.2 * std::cos(0.5 * u + v);
    }
  }
  return t;
}

}  // namespace

TEST(Affine, InverseComposesToIdentity) {
  const Affine a = Affine::similarity(4.0, 1.07, 3.5, -2.0);
  const Affine b = a.inverse();
  // Apply a then b to a centred point.
  const double x = 7.0, y = -3.0;
  const auto& p = a.coeffs;
  const auto& q = b.coeffs;
  const double x1 = p[0] * x + p[1] * y + p[4], y1 = p[2] * x + p[3] * y + p[5];
  EXPECT_NEAR(q[0] * x1 + q[1] * y1 + q[4], x, 1e-12);
  EXPECT_NEAR(q[2] * x1 + q[3] * y1 + q[5], y, 1e-12);
}

TEST(Affine, SingularLinearPartIsAParameterError) {
  const Affine a{{1.0, 2.0, 0.5, 1.0, 0.0, 0.0}};
  EXPECT_THROW(a.inverse(), ParameterError);
  EXPECT_THROW(synth::affine_warp(Tensor::zeros({1, 1, 4, 4}), a), ParameterError);
}

TEST(AffineWarp, IdentityIsBitExact) {
  const Tensor img = salign::testing::random_tensor({2, 3, 9, 7}, 5);
  const Tensor out = synth::affine_warp(img, Affine::identity());
  EXPECT_TRUE(std::equal(img.data().begin(), img.data().end(), out.data().begin()));
}

TEST(AffineWarp, IntegerTranslationIsExactShift) {
  const Tensor img = salign::testing::random_tensor({1, 2, 10, 12}, 8);
  const Tensor out = synth::affine_warp(img, Affine::translation(3.0, -2.0));
  for (std::int64_t c = 0; c < 2; ++c) {
    for (std::int64_t y = 0; y < 10; ++y) {
      for (std::int64_t x = 0; x < 12; ++x) {
        const std::int64_t sx = x - 3, sy = y + 2;
        const double want = (sx < 0 || sx >= 12 || sy < 0 || sy >= 10) ? 0.0 : img.at(0, c, sy, sx);
        ASSERT_EQ(out.at(0, c, y, x), want) << c << " " << y << " " << x;
      }
    }
  }
}

TEST(AffineWarp, ForwardThenInverseOnSmoothImage) {
  const std::int64_t S = 64;
  const Tensor img = smooth_image(S);
  const Affine a = Affine::similarity(5.0, 1.1, 4.3, -3.7);
  const Tensor back = synth::affine_warp(synth::affine_warp(img, a), a.inverse());
  double worst = 0.0;
  const std::int64_t margin = 12;
  for (std::int64_t y = margin; y < S - margin; ++y) {
    for (std::int64_t x = margin; x < S - margin; ++x) {
      worst = std::max(worst, std::abs(back.at(0, 0, y, x) - img.at(0, 0, y, x)));
    }
  }
  EXPECT_LE(worst, 0.02);
}

TEST(SceneSpec, ValidationNamesTheConstraint) {
  synth::SceneSpec spec;
  spec.size = 100;
  try {
    spec.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("power of two"), std::string::npos);
  }
  spec.size = 32;
  spec.max_translation = 4.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec.max_translation = 3.9;
  EXPECT_NO_THROW(spec.validate());
  spec.scale_min = 0.0;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(GenScene, SameSeedAndIndexAreBitIdentical) {
  synth::SceneSpec spec;
  spec.size = 64;
  spec.seed = 7;
  const auto a = synth::gen_scene(spec, 3);
  const auto b = synth::gen_scene(spec, 3);
  EXPECT_EQ(salign::testing::max_abs_diff(a.rgb.data(), b.rgb.data()), 0.0);
  EXPECT_EQ(salign::testing::max_abs_diff(a.thermal.data(), b.thermal.data()), 0.0);
  EXPECT_EQ(salign::testing::max_abs_diff(a.gt.data(), b.gt.data()), 0.0);
  EXPECT_EQ(a.true_affine.coeffs, b.true_affine.coeffs);
  const auto c = synth::gen_scene(spec, 4);
  EXPECT_GT(salign::testing::max_abs_diff(a.rgb.data(), c.rgb.data()), 0.0);
}

TEST(GenScene, ShapesAndRanges) {
  synth::SceneSpec spec;
  spec.size = 64;
  const auto s = synth::gen_scene(spec, 0);
  EXPECT_EQ(s.rgb.shape(), (Shape{1, 3, 64, 64}));
  EXPECT_EQ(s.thermal.shape(), (Shape{1, 3, 64, 64}));
  EXPECT_EQ(s.gt.shape(), (Shape{1, 1, 64, 64}));
  for (double v : s.gt.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  for (double v : s.rgb.data()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  // Thermal channels are one replicated field.
  for (std::int64_t y = 0; y < 64; ++y) {
    for (std::int64_t x = 0; x < 64; ++x) {
      EXPECT_EQ(s.thermal.at(0, 1, y, x), s.thermal.at(0, 0, y, x));
      EXPECT_EQ(s.thermal.at(0, 2, y, x), s.thermal.at(0, 0, y, x));
    }
  }
}

TEST(GenScene, AlignedNoiselessSilhouetteEqualsGt) {
  const auto spec = aligned_clean_spec();
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto s = synth::gen_scene(spec, i);
    for (std::int64_t y = 0; y < spec.size; ++y) {
      for (std::int64_t x = 0; x < spec.size; ++x) {
        const bool hot = s.thermal.at(0, 0, y, x) > kHotThreshold;
        ASSERT_EQ(hot, s.gt.at(0, 0, y, x) == 1.0) << i << " " << y << " " << x;
      }
    }
  }
}

TEST(GenScene, TranslationShiftsThermalCentroid) {
  const auto spec = aligned_clean_spec();
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto s = synth::render_scene(spec, i, Affine::translation(2.0, 0.0));
    const auto rgb_c = synth::centroid(s.gt, 0.5);
    const auto th_c = synth::centroid(s.thermal, kHotThreshold);
    EXPECT_NEAR(th_c[0] - rgb_c[0], 2.0, 0.5) << i;
    EXPECT_NEAR(th_c[1] - rgb_c[1], 0.0, 0.5) << i;
  }
}

TEST(GenScene, ComponentCountWithinSpecRange) {
  synth::SceneSpec spec;
  spec.size = 64;
  spec.max_translation = 4.0;
  spec.min_objects = 1;
  spec.max_objects = 3;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const auto s = synth::gen_scene(spec, i);
    const int n = synth::count_components(s.gt);
    EXPECT_GE(n, spec.min_objects) << i;
    EXPECT_LE(n, spec.max_objects) << i;
    EXPECT_EQ(n, s.objects) << i;
  }
}

TEST(GenScene, MeanCentroidOffsetWithinTranslationRange) {
  synth::SceneSpec spec;
  spec.size = 128;
  spec.thermal_noise = 0.0;
  double sum_dx = 0.0, sum_dy = 0.0, sum_abs = 0.0;
  const int samples = 100;
  for (int i = 0; i < samples; ++i) {
    const auto s = synth::gen_scene(spec, static_cast<std::uint64_t>(i));
    const auto rgb_c = synth::centroid(s.gt, 0.5);
    const auto th_c = synth::centroid(s.thermal, kHotThreshold);
    const double dx = th_c[0] - rgb_c[0], dy = th_c[1] - rgb_c[1];
    sum_dx += dx;
    sum_dy += dy;
    sum_abs += std::max(std::abs(dx), std::abs(dy));
  }
  const double T = spec.max_translation;
  EXPECT_LE(std::abs(sum_dx / samples), T);
  EXPECT_LE(std::abs(sum_dy / samples), T);
  EXPECT_LE(sum_abs / samples, T);
  // Misalignment is actually present.
  EXPECT_GT(sum_abs / samples, 0.5);
}

TEST(Components, CountsFourConnectedRegions) {
  Tensor m = Tensor::zeros({1, 1, 5, 5});
  m.at(0, 0, 0, 0) = 1.0;
  m.at(0, 0, 1, 1) = 1.0;  // diagonal only: separate
  m.at(0, 0, 3, 1) = 1.0;
  m.at(0, 0, 3, 2) = 1.0;
  m.at(0, 0, 4, 2) = 1.0;
  EXPECT_EQ(synth::count_components(m), 3);
  EXPECT_EQ(synth::count_components(Tensor::zeros({1, 1, 5, 5})), 0);
}
