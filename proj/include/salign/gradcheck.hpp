#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "salign/params.hpp"
#include "salign/tensor.hpp"

namespace salign {

struct GradCheckOptions {
  double step = 1e-6;
  /// Entries probed per tensor; 0 probes every entry. Probed entries are drawn with `seed`.
  std::int64_t max_entries = 0;
  std::uint64_t seed = 0;
  /// Added to |fd|_2 in the relative error. Gradients far below it are compared
  /// absolutely, where central differences are dominated by round-off.
  double norm_floor = 1e-6;
};

struct GradCheckResult {
  std::string name;
  std::int64_t checked = 0;
  /// |analytic - fd|_2 / (|fd|_2 + norm_floor) over the probed entries.
  double rel_error = 0.0;
  /// max_i |analytic_i - fd_i|.
  double max_abs_error = 0.0;
};

/// Compares reverse-mode gradients of the scalar `loss` against central finite
/// differences for each listed tensor. The tensors are marked requires_grad and
/// restored to their original values afterwards.
std::vector<GradCheckResult> gradcheck(const std::function<Tensor()>& loss, const ParamList& inputs,
                                       const GradCheckOptions& options = {});

double worst_error(const std::vector<GradCheckResult>& results);

}  // namespace salign
