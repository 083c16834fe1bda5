#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "salign/errors.hpp"
#include "salign/gradcheck.hpp"
#include "salign/oracles.hpp"
#include "salign/saf.hpp"
#include "test_util.hpp"

namespace salign {
namespace {

using fourier::cplx;
using testing::max_abs_diff;
using testing::random_projection;
using testing::random_tensor;

saf::SafParams make_block(std::int64_t c, std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  return saf::SafParams::make(c, h, w, 4, 2, rng);
}

void randomize_norms(saf::SafParams& p, std::uint64_t seed) {
  const std::int64_t c = p.norm_rgb.gain.shape().c;
  int i = 0;
  for (NormParams* n : {&p.norm_rgb, &p.norm_thermal, &p.norm_ffn}) {
    n->gain = random_tensor({1, c, 1, 1}, seed + i++, 0.5);
    n->offset = random_tensor({1, c, 1, 1}, seed + i++, 0.5);
  }
}

std::vector<cplx> channel_filter(const Tensor& weights, const saf::SpectralFilterBank& bank, std::int64_t b,
                                 std::int64_t c) {
  const std::int64_t N = bank.count(), H = bank.height(), K = bank.filters.shape().w / 2;
  std::vector<cplx> g(static_cast<std::size_t>(H * K));
  for (std::int64_t n = 0; n < N; ++n) {
    const double w = weights.at(b, c * N + n, 0, 0);
    for (std::int64_t r = 0; r < H; ++r) {
      for (std::int64_t k = 0; k < K; ++k) {
        g[r * K + k] += w * cplx(bank.filters.at(n, 0, r, 2 * k), bank.filters.at(n, 0, r, 2 * k + 1));
      }
    }
  }
  return g;
}

std::span<const double> plane_of(const Tensor& t, std::int64_t n, std::int64_t c) {
  const auto& s = t.shape();
  return t.data().subspan(static_cast<std::size_t>((n * s.c + c) * s.plane()), static_cast<std::size_t>(s.plane()));
}

// --- fuse_inputs ----------------------------------------------------------

TEST(FuseInputs, IdenticalInputsAndNormsDouble) {
  auto p = make_block(4, 8, 8, 1);
  p.norm_rgb.gain = random_tensor({1, 4, 1, 1}, 2);
  p.norm_rgb.offset = random_tensor({1, 4, 1, 1}, 3);
  p.norm_thermal = {p.norm_rgb.gain, p.norm_rgb.offset};
  Tensor x = random_tensor({2, 4, 8, 8}, 4);
  Tensor out = saf::fuse_inputs(x, x, p);
  Tensor ref = ops::scale(p.norm_rgb.apply(x), 2.0);
  EXPECT_LE(max_abs_diff(out.data(), ref.data()), 1e-14);
}

TEST(FuseInputs, ConstantMapsGiveTwiceOffset) {
  auto p = make_block(3, 4, 4, 5);
  Tensor off = Tensor::from({1, 3, 1, 1}, {0.5, -1.0, 2.0});
  p.norm_rgb.offset = off;
  p.norm_thermal.offset = off;
  Tensor out = saf::fuse_inputs(Tensor::full({1, 3, 4, 4}, 3.0), Tensor::full({1, 3, 4, 4}, -7.0), p);
  for (std::int64_t c = 0; c < 3; ++c) {
    for (std::int64_t i = 0; i < 16; ++i) EXPECT_EQ(out.data()[c * 16 + i], 2.0 * off.data()[c]);
  }
}

TEST(FuseInputs, ShapeMismatchRejected) {
  auto p = make_block(4, 8, 8, 6);
  EXPECT_THROW(saf::fuse_inputs(Tensor::zeros({1, 4, 8, 8}), Tensor::zeros({1, 4, 4, 8}), p), DimensionError);
}

TEST(FuseInputs, GradientCheck) {
  auto p = make_block(4, 4, 4, 7);
  randomize_norms(p, 8);
  Tensor r = random_tensor({1, 4, 4, 4}, 9);
  Tensor t = random_tensor({1, 4, 4, 4}, 10);
  auto loss = [&] { return random_projection(saf::fuse_inputs(r, t, p), 11); };
  ParamList probe{{"rgb", r}, {"thermal", t}, {"norm_rgb.gain", p.norm_rgb.gain},
                  {"norm_thermal.offset", p.norm_thermal.offset}};
  for (const auto& g : gradcheck(loss, probe)) EXPECT_LE(g.rel_error, 1e-4) << g.name;
}

// --- egf_weights --------------------------------------------------------------

TEST(EgfWeights, EqualLogitsAreUniform) {
  auto p = make_block(3, 4, 4, 12);
  p.bank.head_weight = Tensor::zeros(p.bank.head_weight.shape());
  Tensor w = saf::egf_weights(random_tensor({2, 3, 4, 4}, 13), p.bank);
  EXPECT_EQ(w.shape(), (Shape{2, 12, 1, 1}));
  for (double v : w.data()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(EgfWeights, LogOfOneToFourGivesTenths) {
  auto p = make_block(2, 4, 4, 14);
  p.bank.head_weight = Tensor::zeros(p.bank.head_weight.shape());
  std::vector<double> bias;
  for (int c = 0; c < 2; ++c) {
    for (int n = 1; n <= 4; ++n) bias.push_back(std::log(static_cast<double>(n)));
  }
  p.bank.head_bias = Tensor::from({1, 8, 1, 1}, bias);
  Tensor w = saf::egf_weights(random_tensor({1, 2, 4, 4}, 15), p.bank);
  for (int c = 0; c < 2; ++c) {
    for (int n = 0; n < 4; ++n) EXPECT_NEAR(w.at(0, c * 4 + n, 0, 0), 0.1 * (n + 1), 1e-12);
  }
}

TEST(EgfWeights, GroupShiftInvariance) {
  auto p = make_block(3, 4, 4, 16);
  Tensor fa = random_tensor({1, 3, 4, 4}, 17);
  Tensor before = saf::egf_weights(fa, p.bank);
  auto bias = p.bank.head_bias.mutable_data();
  for (int n = 0; n < 4; ++n) bias[4 + n] += 3.7;  // channel 1's group
  Tensor after = saf::egf_weights(fa, p.bank);
  EXPECT_LE(max_abs_diff(before.data(), after.data()), 1e-15);
}

TEST(EgfWeights, RowsSumToOne) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = make_block(5, 4, 4, 20 + seed);
    p.bank.head_weight = random_tensor(p.bank.head_weight.shape(), 30 + seed, 3.0);
    Tensor w = saf::egf_weights(random_tensor({3, 5, 4, 4}, 40 + seed), p.bank);
    for (std::int64_t b = 0; b < 3; ++b) {
      for (std::int64_t c = 0; c < 5; ++c) {
        double acc = 0.0;
        for (std::int64_t n = 0; n < 4; ++n) {
          const double v = w.at(b, c * 4 + n, 0, 0);
          EXPECT_GT(v, 0.0);
          acc += v;
        }
        EXPECT_NEAR(acc, 1.0, 1e-12);
      }
    }
  }
}

// --- egf_forward --------------------------------------------------------------

TEST(EgfForward, IdentityFiltersReproduceActivation) {
  auto p = make_block(4, 8, 8, 50);
  p.bank.fill_filters({1.0, 0.0});
  Tensor fa = random_tensor({2, 4, 8, 8}, 51);
  Tensor out = saf::egf_forward(fa, p.bank, p.mixer_act);
  Tensor ref = p.mixer_act.apply(fa);
  EXPECT_LE(max_abs_diff(out.data(), ref.data()), 1e-10);
}

TEST(EgfForward, ZeroFiltersAnnihilate) {
  auto p = make_block(4, 8, 8, 52);
  p.bank.fill_filters({0.0, 0.0});
  Tensor out = saf::egf_forward(random_tensor({1, 4, 8, 8}, 53), p.bank, p.mixer_act);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(EgfForward, ResolutionMismatchIsConfigError) {
  auto p = make_block(4, 8, 8, 54);
  EXPECT_THROW(saf::egf_forward(Tensor::zeros({1, 4, 16, 16}), p.bank, p.mixer_act), ConfigError);
}

TEST(EgfForward, MatchesCircularConvolutionWithSynthesizedKernel) {
  const std::int64_t C = 4, H = 8, W = 8;
  auto p = make_block(C, H, W, 55);
  p.bank.filters = random_tensor(p.bank.filters.shape(), 56);
  p.bank.head_weight = random_tensor(p.bank.head_weight.shape(), 57);
  Tensor fa = random_tensor({1, C, H, W}, 58);
  Tensor out = saf::egf_forward(fa, p.bank, p.mixer_act);
  Tensor w = saf::egf_weights(fa, p.bank);
  Tensor act = p.mixer_act.apply(fa);
  for (std::int64_t c = 0; c < C; ++c) {
    auto kernel = oracle::naive_idft2_real(oracle::expand_half_spectrum(channel_filter(w, p.bank, 0, c), H, W), H, W);
    auto ref = oracle::circular_convolve2(plane_of(act, 0, c), kernel, H, W);
    EXPECT_LE(max_abs_diff(plane_of(out, 0, c), ref), 1e-8) << "channel " << c;
  }
}

TEST(EgfForward, NoImaginaryLeakage) {
  // Rebuild the output from the full product spectrum with the self-conjugate
  // columns made Hermitian, via an independent complex inverse DFT.
  const std::int64_t C = 2, H = 8, W = 8, K = W / 2 + 1;
  auto p = make_block(C, H, W, 60);
  p.bank.filters = random_tensor(p.bank.filters.shape(), 61);
  Tensor fa = random_tensor({1, C, H, W}, 62);
  Tensor out = saf::egf_forward(fa, p.bank, p.mixer_act);
  Tensor w = saf::egf_weights(fa, p.bank);
  Tensor act = p.mixer_act.apply(fa);
  for (std::int64_t c = 0; c < C; ++c) {
    auto g = channel_filter(w, p.bank, 0, c);
    auto x = oracle::naive_dft2(plane_of(act, 0, c), H, W);
    std::vector<cplx> half(static_cast<std::size_t>(H * K));
    for (std::int64_t r = 0; r < H; ++r) {
      for (std::int64_t k = 0; k < K; ++k) half[r * K + k] = g[r * K + k] * x[r * W + k];
    }
    for (std::int64_t k : {std::int64_t{0}, W / 2}) {
      std::vector<cplx> col(static_cast<std::size_t>(H));
      for (std::int64_t r = 0; r < H; ++r) col[r] = 0.5 * (half[r * K + k] + std::conj(half[((H - r) % H) * K + k]));
      for (std::int64_t r = 0; r < H; ++r) half[r * K + k] = col[r];
    }
    auto full = oracle::expand_half_spectrum(half, H, W);
    double leak = 0.0, diff = 0.0;
    for (std::int64_t y = 0; y < H; ++y) {
      for (std::int64_t xx = 0; xx < W; ++xx) {
        cplx acc{0.0, 0.0};
        for (std::int64_t kh = 0; kh < H; ++kh) {
          for (std::int64_t kw = 0; kw < W; ++kw) {
            const double angle = 2.0 * std::numbers::pi * (double(kh * y) / double(H) + double(kw * xx) / double(W));
            acc += full[kh * W + kw] * std::polar(1.0, angle);
          }
        }
        acc /= static_cast<double>(H * W);
        leak = std::max(leak, std::abs(acc.imag()));
        diff = std::max(diff, std::abs(acc.real() - out.at(0, c, y, xx)));
      }
    }
    EXPECT_LE(leak, 1e-10);
    EXPECT_LE(diff, 1e-10);
  }
}

TEST(EgfForward, GradientCheck) {
  const std::int64_t C = 3, H = 4, W = 8;
  auto p = make_block(C, H, W, 63);
  p.bank.filters = random_tensor(p.bank.filters.shape(), 64);
  Tensor fa = random_tensor({2, C, H, W}, 65);
  auto loss = [&] { return random_projection(saf::egf_forward(fa, p.bank, p.mixer_act), 66); };
  ParamList probe{{"fa", fa}, {"filters", p.bank.filters}, {"head.weight", p.bank.head_weight},
                  {"head.bias", p.bank.head_bias}, {"act.s", p.mixer_act.s}, {"act.b", p.mixer_act.b}};
  for (const auto& g : gradcheck(loss, probe)) EXPECT_LE(g.rel_error, 1e-4) << g.name;
}

// --- saf_block ----------------------------------------------------------------

TEST(SafBlock, ZeroBranchesPassThrough) {
  auto p = make_block(4, 8, 8, 70);
  randomize_norms(p, 71);
  p.bank.fill_filters({0.0, 0.0});
  p.ffn.reduce_weight = Tensor::zeros(p.ffn.reduce_weight.shape());
  Tensor r = random_tensor({2, 4, 8, 8}, 72);
  Tensor t = random_tensor({2, 4, 8, 8}, 73);
  Tensor out = saf::saf_block(r, t, p);
  Tensor fa = saf::fuse_inputs(r, t, p);
  EXPECT_LE(max_abs_diff(out.data(), fa.data()), 1e-14);
}

TEST(SafBlock, ShapePreserved) {
  auto p = make_block(16, 8, 8, 74);
  Tensor out = saf::saf_block(random_tensor({2, 16, 8, 8}, 75), random_tensor({2, 16, 8, 8}, 76), p);
  EXPECT_EQ(out.shape(), (Shape{2, 16, 8, 8}));
}

TEST(SafBlock, GradientCheck) {
  auto p = make_block(4, 8, 8, 77);
  randomize_norms(p, 78);
  p.bank.filters = random_tensor(p.bank.filters.shape(), 79, 0.5);
  Tensor r = random_tensor({1, 4, 8, 8}, 80);
  Tensor t = random_tensor({1, 4, 8, 8}, 81);
  auto loss = [&] { return random_projection(saf::saf_block(r, t, p), 82); };
  ParamList probe{{"rgb", r}, {"thermal", t}};
  p.collect(probe, "saf");
  GradCheckOptions opts;
  opts.max_entries = 24;
  opts.seed = 83;
  for (const auto& g : gradcheck(loss, probe, opts)) EXPECT_LE(g.rel_error, 1e-4) << g.name;
}

TEST(SafBlock, ParameterCountMatchesClosedForm) {
  for (auto [c, h, w, n, e] : {std::tuple{16, 32, 32, 4, 2}, std::tuple{8, 4, 8, 2, 1}, std::tuple{3, 8, 4, 1, 3}}) {
    Rng rng(84);
    auto p = saf::SafParams::make(c, h, w, n, e, rng);
    ParamList list;
    p.collect(list, "saf");
    EXPECT_EQ(count_parameters(list), saf::parameter_count(c, h, w, n, e));
    // Hand count for the first configuration.
    if (c == 16) {
      const std::int64_t hidden = 32;
      const std::int64_t expected = 6 * 16 + 4 + 4 * 32 * 2 * 17 + 4 * 16 * 16 + 4 * 16 + (hidden * 16 + hidden) +
                                    (9 * hidden + hidden * hidden + hidden) + (16 * hidden + 16);
      EXPECT_EQ(count_parameters(list), expected);
    }
  }
}

}  // namespace
}  // namespace salign
