#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace salign::verify {

/// One oracle comparison: measured error against a fixed tolerance.
struct Check {
  std::string suite;
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;

  bool passed() const;
};

std::vector<Check> fft_suite();
std::vector<Check> egf_suite();
std::vector<Check> scal_suite();
/// Finite-difference checks of every differentiable op and composite block.
std::vector<Check> grad_suite();

/// `level` is one of fft, egf, scal, grad, all. Throws ConfigError otherwise.
std::vector<Check> run(std::string_view level);

/// "PASS  fft  round_trip_16x16  error 1.2e-15  tol 1e-10"
std::string format(const Check& check);

bool all_passed(const std::vector<Check>& checks);

/// Free-parameter descent on the alignment loss alone, for a feature map and a
/// one-pixel shifted noisy copy of it.
struct AlignmentRun {
  int steps = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double initial_cosine = 0.0;  // mean cosine at true correspondences
  double final_cosine = 0.0;
  int loss_increases = 0;
};

AlignmentRun scal_alignment(int channels = 32, int side = 16, double noise = 0.05, int steps = 200, double lr = 20.0,
                            unsigned long long seed = 26);

}  // namespace salign::verify
