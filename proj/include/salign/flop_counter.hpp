#pragma once

#include <cstdint>

namespace salign::flops {

// Per-operation floating-point operation counts. A multiply-add is 2, a
// radix-2 complex butterfly is 10 (complex multiply + two complex adds).
// The runtime counter and the analytic model both use these.
namespace cost {

constexpr std::int64_t kButterfly = 10;

inline std::int64_t elementwise(std::int64_t numel) { return numel; }
inline std::int64_t star_relu(std::int64_t numel) { return 3 * numel; }
inline std::int64_t sigmoid(std::int64_t numel) { return 4 * numel; }
inline std::int64_t layer_norm(std::int64_t numel) { return 7 * numel; }
inline std::int64_t depthwise3x3(std::int64_t numel) { return 2 * 9 * numel; }
inline std::int64_t pointwise(std::int64_t batch, std::int64_t c_in, std::int64_t c_out, std::int64_t plane,
                              bool bias) {
  return batch * plane * c_out * (2 * c_in + (bias ? 1 : 0));
}
inline std::int64_t patch_conv(std::int64_t batch, std::int64_t c_in, std::int64_t c_out, std::int64_t stride,
                               std::int64_t out_plane) {
  return batch * out_plane * c_out * (2 * c_in * stride * stride + 1);
}
inline std::int64_t gap(std::int64_t numel) { return numel; }
inline std::int64_t group_softmax(std::int64_t numel) { return 3 * numel; }

int log2_exact(std::int64_t n);

/// Full complex 2-D transform of an h x w plane: rows then columns.
inline std::int64_t fft2_plane(std::int64_t h, std::int64_t w) {
  return kButterfly * (h * (w / 2) * log2_exact(w) + w * (h / 2) * log2_exact(h));
}
inline std::int64_t complex_mul(std::int64_t complex_numel) { return 6 * complex_numel; }
inline std::int64_t mix_filters(std::int64_t batch, std::int64_t channels, std::int64_t filters,
                                std::int64_t complex_plane) {
  return 4 * batch * channels * filters * complex_plane;
}

/// Reference cost of dense self-attention mixing over h*w tokens of width c.
inline std::int64_t attention_mixer(std::int64_t h, std::int64_t w, std::int64_t c) {
  const std::int64_t tokens = h * w;
  return 4 * tokens * tokens * c;
}

}  // namespace cost

/// Adds to the counter of the innermost active Scope on this thread, if any.
void add(std::int64_t count);

/// Counts operations executed on this thread while alive.
class Scope {
 public:
  Scope();
  ~Scope();
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;
  std::int64_t total() const { return total_; }

 private:
  friend void add(std::int64_t);
  std::int64_t total_ = 0;
  Scope* previous_;
};

}  // namespace salign::flops
