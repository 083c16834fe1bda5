#include "salign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "salign/errors.hpp"

namespace salign::metrics {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": saliency has " + std::to_string(a.size()) + " pixels, ground truth " +
                         std::to_string(b.size()));
  }
}

/// Number of grid thresholds strictly below s, i.e. count of k with s > k/255.
int thresholds_below(double s) {
  int k = std::clamp(static_cast<int>(std::ceil(s * 255.0)) - 1, -1, kThresholds - 1);
  // Correct the estimate against the exact comparison used by the definition.
  while (k + 1 < kThresholds && s > threshold(k + 1)) ++k;
  while (k >= 0 && !(s > threshold(k))) --k;
  return k + 1;
}

void finish(EvalReport& r, double beta_sq) {
  double sum = 0.0;
  r.f_beta_max = 0.0;
  for (int k = 0; k < kThresholds; ++k) {
    r.curve.f_beta[k] = f_beta(r.curve.precision[k], r.curve.recall[k], beta_sq);
    r.f_beta_max = std::max(r.f_beta_max, r.curve.f_beta[k]);
    sum += r.curve.f_beta[k];
  }
  r.f_beta_mean = sum / kThresholds;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double mae(std::span<const double> saliency, std::span<const double> gt) {
  require_same_length(saliency, gt, "mae");
  if (saliency.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < saliency.size(); ++i) acc += std::abs(saliency[i] - gt[i]);
  return acc / static_cast<double>(saliency.size());
}

Confusion confusion(std::span<const double> saliency, std::span<const double> gt) {
  require_same_length(saliency, gt, "confusion");
  // Histogram of "highest threshold exceeded", then suffix sums.
  std::array<std::int64_t, kThresholds + 1> pos_hist{}, neg_hist{};
  Confusion c;
  for (std::size_t i = 0; i < saliency.size(); ++i) {
    const int above = thresholds_below(saliency[i]);
    if (gt[i] > 0.5) {
      ++pos_hist[above];
      ++c.positives;
    } else {
      ++neg_hist[above];
    }
  }
  // Pixel with `above` = a is positive at thresholds k < a.
  std::int64_t tp = 0, fp = 0;
  for (int k = kThresholds - 1; k >= 0; --k) {
    tp += pos_hist[k + 1];
    fp += neg_hist[k + 1];
    c.tp[k] = tp;
    c.fp[k] = fp;
  }
  return c;
}

double f_beta(double precision, double recall, double beta_sq) {
  const double den = beta_sq * precision + recall;
  return den > 0.0 ? (1.0 + beta_sq) * precision * recall / den : 0.0;
}

EvalReport pr_f(std::span<const double> saliency, std::span<const double> gt, double beta_sq) {
  EvalReport r;
  r.mae = mae(saliency, gt);
  r.samples = 1;
  const Confusion c = confusion(saliency, gt);
  r.degenerate = c.positives == 0;
  for (int k = 0; k < kThresholds; ++k) {
    const std::int64_t predicted = c.tp[k] + c.fp[k];
    r.curve.precision[k] = predicted > 0 ? static_cast<double>(c.tp[k]) / static_cast<double>(predicted) : 0.0;
    r.curve.recall[k] = c.positives > 0 ? static_cast<double>(c.tp[k]) / static_cast<double>(c.positives) : 0.0;
  }
  finish(r, beta_sq);
  return r;
}

void Aggregator::add(const EvalReport& sample) {
  mae_sum_ += sample.mae;
  for (int k = 0; k < kThresholds; ++k) {
    precision_sum_[k] += sample.curve.precision[k];
    recall_sum_[k] += sample.curve.recall[k];
  }
  degenerate_ = degenerate_ || sample.degenerate;
  ++count_;
}

EvalReport Aggregator::result() const {
  EvalReport r;
  r.samples = count_;
  r.degenerate = degenerate_;
  if (count_ == 0) return r;
  const double inv = 1.0 / static_cast<double>(count_);
  r.mae = mae_sum_ * inv;
  for (int k = 0; k < kThresholds; ++k) {
    r.curve.precision[k] = precision_sum_[k] * inv;
    r.curve.recall[k] = recall_sum_[k] * inv;
  }
  finish(r, beta_sq_);
  return r;
}

std::string summary_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "metric,value\n";
  os << "mae," << fmt(report.mae) << "\n";
  os << "f_beta_max," << fmt(report.f_beta_max) << "\n";
  os << "f_beta_mean," << fmt(report.f_beta_mean) << "\n";
  os << "samples," << report.samples << "\n";
  os << "degenerate," << (report.degenerate ? 1 : 0) << "\n";
  return os.str();
}

std::string curve_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "threshold,precision,recall,f_beta\n";
  for (int k = 0; k < kThresholds; ++k) {
    os << fmt(threshold(k)) << ',' << fmt(report.curve.precision[k]) << ',' << fmt(report.curve.recall[k]) << ','
       << fmt(report.curve.f_beta[k]) << "\n";
  }
  return os.str();
}

}  // namespace salign::metrics
