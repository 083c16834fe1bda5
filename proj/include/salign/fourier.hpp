#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "salign/tensor.hpp"

namespace salign::fourier {

using cplx = std::complex<double>;

/// Half-spectrum of a real (B, C, H, W) map: (B, C, H, W/2+1) complex bins,
/// stored as a real tensor (B, C, H, 2*(W/2+1)) with interleaved re/im so it
/// rides on the same autograd machinery as feature maps.
struct SpectralTensor {
  Tensor values;
  std::int64_t origin_width = 0;

  static std::int64_t bins_for(std::int64_t width) { return width / 2 + 1; }

  std::int64_t batch() const { return values.shape().n; }
  std::int64_t channels() const { return values.shape().c; }
  std::int64_t height() const { return values.shape().h; }
  std::int64_t bins() const { return values.shape().w / 2; }
  /// (B, C, H, W/2+1) in complex units.
  Shape spectral_shape() const { return {batch(), channels(), height(), bins()}; }

  cplx bin(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t k) const {
    return {values.at(n, c, h, 2 * k), values.at(n, c, h, 2 * k + 1)};
  }

  static SpectralTensor zeros(Shape spectral_shape, std::int64_t origin_width);
  static SpectralTensor from_bins(Shape spectral_shape, std::int64_t origin_width, std::span<const cplx> bins);
};

/// Multiplicity of half-spectrum column k when counting the full spectrum:
/// 1 for the DC column and (even widths) the Nyquist column, 2 otherwise.
int column_multiplicity(std::int64_t k, std::int64_t width);

/// Unnormalized forward transform over (H, W). H and W must be powers of two.
SpectralTensor rfft2(const Tensor& x);

/// Inverse of rfft2 carrying the full 1/(H*W) normalization.
Tensor irfft2(const SpectralTensor& spectrum);

/// Elementwise complex product of equal-shape spectra.
SpectralTensor complex_mul(const SpectralTensor& a, const SpectralTensor& b);

/// In-place radix-2 complex FFT of length data.size() (power of two).
/// `inverse` uses conjugate twiddles and does not scale.
void fft_inplace(std::span<cplx> data, bool inverse);

/// Full complex 2-D FFT of a row-major h x w plane, in place, unscaled.
void fft2_inplace(std::span<cplx> plane, std::int64_t h, std::int64_t w, bool inverse);

void require_power_of_two(std::int64_t n, const char* what);

}  // namespace salign::fourier
