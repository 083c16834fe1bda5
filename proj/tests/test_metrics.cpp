#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "salign/errors.hpp"
#include "salign/metrics.hpp"

using namespace salign;

namespace {

std::vector<double> half_ones(std::size_t n) {
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n / 2; ++i) g[i] = 1.0;
  return g;
}

std::vector<double> random_map(std::size_t n, unsigned seed, bool binary) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = binary ? (u(rng) > 0.6 ? 1.0 : 0.0) : u(rng);
  return v;
}

}  // namespace

TEST(Mae, PerfectInvertedAndHalf) {
  const auto g = half_ones(64);
  EXPECT_EQ(metrics::mae(g, g), 0.0);
  std::vector<double> inv(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) inv[i] = 1.0 - g[i];
  EXPECT_EQ(metrics::mae(inv, g), 1.0);
  EXPECT_EQ(metrics::mae(std::vector<double>(64, 0.5), g), 0.5);
}

TEST(Mae, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(metrics::mae(std::vector<double>(3), std::vector<double>(4)), DimensionError);
  EXPECT_THROW(metrics::pr_f(std::vector<double>(3), std::vector<double>(4)), DimensionError);
}

TEST(Mae, SymmetricAndOneLipschitz) {
  const auto s = random_map(256, 1, false);
  const auto g = random_map(256, 2, true);
  EXPECT_EQ(metrics::mae(s, g), metrics::mae(g, s));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  auto p = s;
  double worst = 0.0;
  for (auto& x : p) {
    const double d = u(rng);
    x += d;
    worst = std::max(worst, std::abs(d));
  }
  EXPECT_LE(std::abs(metrics::mae(p, g) - metrics::mae(s, g)), worst + 1e-15);
}

TEST(PrF, PerfectBinaryPrediction) {
  const auto g = random_map(100, 4, true);
  const auto r = metrics::pr_f(g, g);
  for (int k = 0; k < metrics::kThresholds - 1; ++k) {
    EXPECT_EQ(r.curve.precision[k], 1.0) << k;
    EXPECT_EQ(r.curve.recall[k], 1.0) << k;
    EXPECT_NEAR(r.curve.f_beta[k], 1.0, 1e-15) << k;
  }
  // Nothing exceeds threshold 1.
  EXPECT_EQ(r.curve.f_beta[255], 0.0);
  EXPECT_NEAR(r.f_beta_max, 1.0, 1e-15);
  EXPECT_FALSE(r.degenerate);
}

TEST(PrF, UniformOneAgainstHalfOnes) {
  const auto g = half_ones(64);
  const auto r = metrics::pr_f(std::vector<double>(64, 1.0), g);
  const double want = 1.3 * 0.5 / (0.3 * 0.5 + 1.0);
  for (int k = 0; k < metrics::kThresholds - 1; ++k) {
    EXPECT_EQ(r.curve.precision[k], 0.5);
    EXPECT_EQ(r.curve.recall[k], 1.0);
    EXPECT_NEAR(r.curve.f_beta[k], want, 1e-15);
  }
  EXPECT_NEAR(want, 0.5652, 1e-4);
}

TEST(PrF, AllZeroSaliencyScoresZero) {
  const auto r = metrics::pr_f(std::vector<double>(64, 0.0), half_ones(64));
  for (int k = 0; k < metrics::kThresholds; ++k) EXPECT_EQ(r.curve.f_beta[k], 0.0);
  EXPECT_EQ(r.f_beta_max, 0.0);
  EXPECT_EQ(r.f_beta_mean, 0.0);
}

TEST(PrF, EmptyGroundTruthIsDegenerate) {
  const auto r = metrics::pr_f(random_map(64, 9, false), std::vector<double>(64, 0.0));
  EXPECT_TRUE(r.degenerate);
  for (int k = 0; k < metrics::kThresholds; ++k) EXPECT_EQ(r.curve.recall[k], 0.0);
}

TEST(PrF, RecallNonIncreasingAndEntriesInUnitRange) {
  const auto r = metrics::pr_f(random_map(1024, 5, false), random_map(1024, 6, true));
  for (int k = 1; k < metrics::kThresholds; ++k) EXPECT_LE(r.curve.recall[k], r.curve.recall[k - 1]);
  for (int k = 0; k < metrics::kThresholds; ++k) {
    for (double v : {r.curve.precision[k], r.curve.recall[k], r.curve.f_beta[k]}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(PrF, MatchesNaiveDoubleLoopExactly) {
  auto s = random_map(256, 12, false);
  // Include values that sit exactly on the grid.
  s[0] = 0.0;
  s[1] = 1.0;
  s[2] = 128.0 / 255.0;
  s[3] = 17.0 / 255.0;
  const auto g = random_map(256, 13, true);
  const auto r = metrics::pr_f(s, g);
  for (int k = 0; k < 256; ++k) {
    const double t = k / 255.0;
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool pred = s[i] > t;
      const bool pos = g[i] > 0.5;
      tp += pred && pos;
      fp += pred && !pos;
      fn += !pred && pos;
    }
    const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double rc = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f = 0.3 * p + rc > 0 ? 1.3 * p * rc / (0.3 * p + rc) : 0.0;
    ASSERT_EQ(r.curve.precision[k], p) << k;
    ASSERT_EQ(r.curve.recall[k], rc) << k;
    ASSERT_EQ(r.curve.f_beta[k], f) << k;
  }
}

TEST(Aggregator, AveragesMaeAndCurves) {
  const auto g = half_ones(64);
  metrics::Aggregator agg;
  const auto a = metrics::pr_f(g, g);
  const auto b = metrics::pr_f(std::vector<double>(64, 1.0), g);
  agg.add(a);
  agg.add(b);
  const auto r = agg.result();
  EXPECT_EQ(r.samples, 2);
  EXPECT_DOUBLE_EQ(r.mae, 0.5 * (a.mae + b.mae));
  EXPECT_DOUBLE_EQ(r.curve.precision[10], 0.75);
  EXPECT_DOUBLE_EQ(r.curve.recall[10], 1.0);
  EXPECT_DOUBLE_EQ(r.curve.f_beta[10], metrics::f_beta(0.75, 1.0));
}

TEST(Csv, HeadersAndRowCounts) {
  const auto r = metrics::pr_f(random_map(64, 1, false), random_map(64, 2, true));
  const std::string summary = metrics::summary_csv(r);
  EXPECT_EQ(summary.rfind("metric,value\nmae,", 0), 0u);
  const std::string curve = metrics::curve_csv(r);
  EXPECT_EQ(curve.rfind("threshold,precision,recall,f_beta\n0.000000,", 0), 0u);
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 257);
}
