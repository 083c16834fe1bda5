#include <gtest/gtest.h>

#include <array>

#include "salign/flop_counter.hpp"
#include "salign/flop_model.hpp"
#include "salign/saf.hpp"
#include "test_util.hpp"

using namespace salign;

namespace {

ModelConfig small_config(std::int64_t size) {
  ModelConfig cfg;
  cfg.input_size = size;
  cfg.encoder_channels = {4, 8, 8, 16};
  cfg.filters = 2;
  return cfg;
}

}  // namespace

TEST(FlopModel, EgfMixerMatchesInstrumentedCall) {
  Rng rng(1);
  const auto bank = saf::SpectralFilterBank::make(4, 16, 16, 3, rng);
  const auto act = StarReluParams::make();
  const Tensor x = salign::testing::random_tensor({2, 4, 16, 16}, 2);
  NoGradGuard no_grad;
  flops::Scope scope;
  (void)saf::egf_forward(x, bank, act);
  EXPECT_EQ(scope.total(), flops::egf_mixer(2, 4, 16, 16, 3).total());
}

TEST(FlopModel, ForwardMatchesInstrumentedCounter) {
  for (bool saf : {true, false}) {
    ModelConfig cfg = small_config(64);
    cfg.use_saf = saf;
    const auto rows = flops::model_forward(cfg, 2);
    EXPECT_EQ(flops::total(rows), flops::instrumented_forward(cfg, 2)) << saf;
  }
}

TEST(FlopModel, DoublingResolutionScalesMixerLogLinearly) {
  const std::array<std::int64_t, 2> sides{64, 128};
  const auto rows = flops::scaling_table(sides, 16, 4);
  const double egf_ratio = static_cast<double>(rows[1].egf.total()) / static_cast<double>(rows[0].egf.total());
  EXPECT_GE(egf_ratio, 4.0);
  EXPECT_LE(egf_ratio, 5.0);
  EXPECT_EQ(rows[1].attention, 16 * rows[0].attention);
  const double fft_ratio = static_cast<double>(rows[1].egf.fft) / static_cast<double>(rows[0].egf.fft);
  EXPECT_DOUBLE_EQ(fft_ratio, 4.0 * 7.0 / 6.0);
}

TEST(FlopModel, MoreFiltersOnlyChangeSynthesisAndWeights) {
  const auto four = flops::egf_mixer(1, 16, 64, 64, 4);
  const auto eight = flops::egf_mixer(1, 16, 64, 64, 8);
  EXPECT_EQ(four.fft, eight.fft);
  EXPECT_EQ(four.spectral_product, eight.spectral_product);
  EXPECT_EQ(2 * four.synthesis, eight.synthesis);
}

TEST(FlopModel, AttentionReferenceClosedForm) {
  EXPECT_EQ(flops::cost::attention_mixer(8, 8, 3), 4 * 64 * 64 * 3);
}
