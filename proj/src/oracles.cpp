#include "salign/oracles.hpp"

#include <cmath>
#include <numbers>

namespace salign::oracle {

std::vector<cplx> naive_dft2(std::span<const double> plane, std::int64_t h, std::int64_t w) {
  std::vector<cplx> out(static_cast<std::size_t>(h * w));
  for (std::int64_t kh = 0; kh < h; ++kh) {
    for (std::int64_t kw = 0; kw < w; ++kw) {
      cplx acc{0.0, 0.0};
      for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
          const double angle = -2.0 * std::numbers::pi *
                               (static_cast<double>(kh * y) / static_cast<double>(h) +
                                static_cast<double>(kw * x) / static_cast<double>(w));
          acc += plane[y * w + x] * cplx(std::cos(angle), std::sin(angle));
        }
      }
      out[kh * w + kw] = acc;
    }
  }
  return out;
}

std::vector<cplx> expand_half_spectrum(std::span<const cplx> half, std::int64_t h, std::int64_t w) {
  const std::int64_t bins = w / 2 + 1;
  std::vector<cplx> full(static_cast<std::size_t>(h * w));
  for (std::int64_t kh = 0; kh < h; ++kh) {
    for (std::int64_t kw = 0; kw < w; ++kw) {
      if (kw < bins) {
        full[kh * w + kw] = half[kh * bins + kw];
      } else {
        full[kh * w + kw] = std::conj(half[((h - kh) % h) * bins + (w - kw)]);
      }
    }
  }
  return full;
}

std::vector<double> naive_idft2_real(std::span<const cplx> full, std::int64_t h, std::int64_t w) {
  std::vector<double> out(static_cast<std::size_t>(h * w));
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      cplx acc{0.0, 0.0};
      for (std::int64_t kh = 0; kh < h; ++kh) {
        for (std::int64_t kw = 0; kw < w; ++kw) {
          const double angle = 2.0 * std::numbers::pi *
                               (static_cast<double>(kh * y) / static_cast<double>(h) +
                                static_cast<double>(kw * x) / static_cast<double>(w));
          acc += full[kh * w + kw] * cplx(std::cos(angle), std::sin(angle));
        }
      }
      out[y * w + x] = acc.real() / static_cast<double>(h * w);
    }
  }
  return out;
}

std::vector<double> circular_convolve2(std::span<const double> a, std::span<const double> b, std::int64_t h,
                                       std::int64_t w) {
  std::vector<double> out(static_cast<std::size_t>(h * w), 0.0);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::int64_t u = 0; u < h; ++u) {
        for (std::int64_t v = 0; v < w; ++v) {
          acc += a[u * w + v] * b[((y - u + h) % h) * w + ((x - v + w) % w)];
        }
      }
      out[y * w + x] = acc;
    }
  }
  return out;
}

std::vector<double> direct_conv3x3(std::span<const double> plane, std::int64_t h, std::int64_t w,
                                   std::span<const double> kernel9) {
  std::vector<double> out(static_cast<std::size_t>(h * w), 0.0);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const std::int64_t sy = y + ky - 1;
          const std::int64_t sx = x + kx - 1;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
          acc += kernel9[ky * 3 + kx] * plane[sy * w + sx];
        }
      }
      out[y * w + x] = acc;
    }
  }
  return out;
}

double parseval_half_energy(std::span<const cplx> half, std::int64_t h, std::int64_t w) {
  const std::int64_t bins = w / 2 + 1;
  double acc = 0.0;
  for (std::int64_t kh = 0; kh < h; ++kh) {
    for (std::int64_t kw = 0; kw < bins; ++kw) {
      const bool single = kw == 0 || (w % 2 == 0 && kw == w / 2);
      acc += (single ? 1.0 : 2.0) * std::norm(half[kh * bins + kw]);
    }
  }
  return acc / static_cast<double>(h * w);
}

}  // namespace salign::oracle
