#include "salign/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "salign/errors.hpp"

namespace salign {

std::vector<GradCheckResult> gradcheck(const std::function<Tensor()>& loss, const ParamList& inputs,
                                       const GradCheckOptions& options) {
  ParamList tracked = inputs;
  for (auto& [name, t] : tracked) {
    t.set_requires_grad(true);
    t.zero_grad();
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor l = loss();
    tape.backward(l);
  }
  for (auto& [name, t] : tracked) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
    }
    t.zero_grad();
  }

  auto evaluate = [&loss]() {
    NoGradGuard guard;
    return loss().item();
  };

  Rng rng(options.seed);
  std::vector<GradCheckResult> results;
  for (std::size_t ti = 0; ti < tracked.size(); ++ti) {
    auto& [name, t] = tracked[ti];
    std::vector<std::int64_t> entries(static_cast<std::size_t>(t.numel()));
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries > 0 && t.numel() > options.max_entries) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(static_cast<std::size_t>(options.max_entries));
      std::sort(entries.begin(), entries.end());
    }

    double diff2 = 0.0;
    double fd2 = 0.0;
    GradCheckResult r;
    r.name = name;
    auto values = t.mutable_data();
    for (std::int64_t e : entries) {
      const double saved = values[e];
      values[e] = saved + options.step;
      const double up = evaluate();
      values[e] = saved - options.step;
      const double down = evaluate();
      values[e] = saved;
      const double fd = (up - down) / (2.0 * options.step);
      const double d = analytic[ti][e] - fd;
      diff2 += d * d;
      fd2 += fd * fd;
      r.max_abs_error = std::max(r.max_abs_error, std::abs(d));
    }
    r.checked = static_cast<std::int64_t>(entries.size());
    r.rel_error = std::sqrt(diff2) / (std::sqrt(fd2) + options.norm_floor);
    results.push_back(r);
  }
  return results;
}

double worst_error(const std::vector<GradCheckResult>& results) {
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.rel_error);
  return worst;
}

}  // namespace salign
