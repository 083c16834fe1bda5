#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace salign::metrics {

inline constexpr int kThresholds = 256;
inline constexpr double kDefaultBetaSq = 0.3;

/// Threshold k of the binarization grid, k / 255.
inline double threshold(int k) { return static_cast<double>(k) / 255.0; }

/// Mean |s - g|. Throws DimensionError on length mismatch.
double mae(std::span<const double> saliency, std::span<const double> gt);

/// Pixel counts at every threshold; a pixel is predicted positive when s > k/255.
struct Confusion {
  std::array<std::int64_t, kThresholds> tp{};
  std::array<std::int64_t, kThresholds> fp{};
  std::int64_t positives = 0;  // gt > 0.5
};

Confusion confusion(std::span<const double> saliency, std::span<const double> gt);

struct PrCurve {
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
  std::array<double, kThresholds> f_beta{};
};

/// (1 + b2) P R / (b2 P + R), 0 when the denominator is 0.
double f_beta(double precision, double recall, double beta_sq = kDefaultBetaSq);

struct EvalReport {
  double mae = 0.0;
  double f_beta_max = 0.0;
  double f_beta_mean = 0.0;
  PrCurve curve;
  /// Some ground truth had no positive pixels.
  bool degenerate = false;
  std::int64_t samples = 0;
};

/// Precision/recall/F per threshold for one map, 0/0 read as 0.
EvalReport pr_f(std::span<const double> saliency, std::span<const double> gt, double beta_sq = kDefaultBetaSq);

/// Accumulates per-sample reports into dataset-level figures: MAE is averaged;
/// precision and recall curves are averaged over samples and F is computed
/// from the mean curves.
class Aggregator {
 public:
  explicit Aggregator(double beta_sq = kDefaultBetaSq) : beta_sq_(beta_sq) {}
  void add(const EvalReport& sample);
  EvalReport result() const;

 private:
  double beta_sq_;
  double mae_sum_ = 0.0;
  std::array<double, kThresholds> precision_sum_{};
  std::array<double, kThresholds> recall_sum_{};
  std::int64_t count_ = 0;
  bool degenerate_ = false;
};

/// `metric,value` rows.
std::string summary_csv(const EvalReport& report);
/// `threshold,precision,recall,f_beta` rows.
std::string curve_csv(const EvalReport& report);

}  // namespace salign::metrics
