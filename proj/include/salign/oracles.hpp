#pragma once

// Slow reference computations used to certify the fast paths. Nothing here
// calls into the FFT, convolution or loss implementations it is compared with.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace salign::oracle {

using cplx = std::complex<double>;

/// O(H^2 W^2) forward DFT of a real h x w plane, full spectrum, row-major.
std::vector<cplx> naive_dft2(std::span<const double> plane, std::int64_t h, std::int64_t w);

/// Full h x w spectrum from a half spectrum (h x (w/2+1)) via conjugate symmetry.
std::vector<cplx> expand_half_spectrum(std::span<const cplx> half, std::int64_t h, std::int64_t w);

/// O(H^2 W^2) inverse DFT with 1/(h w) normalization; returns real parts.
std::vector<double> naive_idft2_real(std::span<const cplx> full, std::int64_t h, std::int64_t w);

/// out[y, x] = sum_{u, v} a[u, v] * b[(y - u) mod h, (x - v) mod w].
std::vector<double> circular_convolve2(std::span<const double> a, std::span<const double> b, std::int64_t h,
                                       std::int64_t w);

/// Nested-loop zero-padded 3x3 cross-correlation of one plane.
std::vector<double> direct_conv3x3(std::span<const double> plane, std::int64_t h, std::int64_t w,
                                   std::span<const double> kernel9);

/// sum x^2 versus (1/(h w)) sum_k m_k |X_k|^2 over a half spectrum.
double parseval_half_energy(std::span<const cplx> half, std::int64_t h, std::int64_t w);

}  // namespace salign::oracle
