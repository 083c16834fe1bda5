#include "salign/fourier.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "salign/errors.hpp"
#include "salign/flop_counter.hpp"

namespace salign::fourier {

namespace {

using autograd::grad_sink;
using autograd::should_record;

// Bit-reversal permutation and forward twiddles for one transform length.
struct FftPlan {
  std::size_t n = 0;
  int log2n = 0;
  std::vector<std::size_t> bitrev;
  std::vector<cplx> twiddle;  // exp(-2 pi i k / n), k < n/2
};

std::unique_ptr<FftPlan> make_plan(std::size_t n) {
  auto plan = std::make_unique<FftPlan>();
  plan->n = n;
  while ((std::size_t{1} << plan->log2n) < n) ++plan->log2n;
  plan->bitrev.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (int b = 0; b < plan->log2n; ++b) r |= ((i >> b) & 1u) << (plan->log2n - 1 - b);
    plan->bitrev[i] = r;
  }
  plan->twiddle.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    plan->twiddle[k] = {std::cos(angle), std::sin(angle)};
  }
  return plan;
}

const FftPlan& plan_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = make_plan(n);
  return *slot;
}

// Forward half-spectrum transform of one real h x w plane into interleaved bins.
void forward_plane(const double* x, std::int64_t h, std::int64_t w, double* out, std::vector<cplx>& buf) {
  buf.resize(static_cast<std::size_t>(h * w));
  for (std::int64_t i = 0; i < h * w; ++i) buf[i] = {x[i], 0.0};
  fft2_inplace(buf, h, w, false);
  const std::int64_t bins = SpectralTensor::bins_for(w);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t k = 0; k < bins; ++k) {
      out[2 * (r * bins + k)] = buf[r * w + k].real();
      out[2 * (r * bins + k) + 1] = buf[r * w + k].imag();
    }
  }
}

// Inverse of forward_plane: expands conjugate-symmetric columns, scales by 1/(h w), keeps the real part.
void inverse_plane(const double* spec, std::int64_t h, std::int64_t w, double* out, std::vector<cplx>& buf) {
  buf.resize(static_cast<std::size_t>(h * w));
  const std::int64_t bins = SpectralTensor::bins_for(w);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t k = 0; k < w; ++k) {
      if (k < bins) {
        buf[r * w + k] = {spec[2 * (r * bins + k)], spec[2 * (r * bins + k) + 1]};
      } else {
        const std::int64_t rr = (h - r) % h;
        const std::int64_t kk = w - k;
        buf[r * w + k] = {spec[2 * (rr * bins + kk)], -spec[2 * (rr * bins + kk) + 1]};
      }
    }
  }
  fft2_inplace(buf, h, w, true);
  const double norm = 1.0 / static_cast<double>(h * w);
  for (std::int64_t i = 0; i < h * w; ++i) out[i] = buf[i].real() * norm;
}

}  // namespace

void require_power_of_two(std::int64_t n, const char* what) {
  if (n < 1 || (n & (n - 1)) != 0) {
    throw ConfigError(std::string(what) + " = " + std::to_string(n) + " is not a power of two");
  }
}

int column_multiplicity(std::int64_t k, std::int64_t width) {
  if (k == 0) return 1;
  if (width % 2 == 0 && k == width / 2) return 1;
  return 2;
}

SpectralTensor SpectralTensor::zeros(Shape spectral_shape, std::int64_t origin_width) {
  if (spectral_shape.w != bins_for(origin_width)) {
    throw ContractError("spectrum width " + std::to_string(spectral_shape.w) + " inconsistent with origin width " +
                        std::to_string(origin_width));
  }
  return {Tensor::zeros({spectral_shape.n, spectral_shape.c, spectral_shape.h, 2 * spectral_shape.w}), origin_width};
}

SpectralTensor SpectralTensor::from_bins(Shape spectral_shape, std::int64_t origin_width, std::span<const cplx> bins) {
  SpectralTensor out = zeros(spectral_shape, origin_width);
  if (static_cast<std::int64_t>(bins.size()) != spectral_shape.numel()) {
    throw DimensionError("bin count does not match spectral shape " + spectral_shape.str());
  }
  auto v = out.values.mutable_data();
  for (std::size_t i = 0; i < bins.size(); ++i) {
    v[2 * i] = bins[i].real();
    v[2 * i + 1] = bins[i].imag();
  }
  return out;
}

void fft_inplace(std::span<cplx> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  require_power_of_two(static_cast<std::int64_t>(n), "transform length");
  const FftPlan& plan = plan_for(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = plan.bitrev[i];
    if (i < j) std::swap(data[i], data[j]);
  }
  std::int64_t butterflies = 0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cplx tw = plan.twiddle[k * step];
        if (inverse) tw = std::conj(tw);
        const cplx t = tw * data[start + k + half];
        const cplx u = data[start + k];
        data[start + k] = u + t;
        data[start + k + half] = u - t;
      }
      butterflies += static_cast<std::int64_t>(half);
    }
  }
  flops::add(flops::cost::kButterfly * butterflies);
}

void fft2_inplace(std::span<cplx> plane, std::int64_t h, std::int64_t w, bool inverse) {
  require_power_of_two(h, "height");
  require_power_of_two(w, "width");
  for (std::int64_t r = 0; r < h; ++r) fft_inplace(plane.subspan(static_cast<std::size_t>(r * w), w), inverse);
  std::vector<cplx> column(static_cast<std::size_t>(h));
  for (std::int64_t k = 0; k < w; ++k) {
    for (std::int64_t r = 0; r < h; ++r) column[r] = plane[r * w + k];
    fft_inplace(column, inverse);
    for (std::int64_t r = 0; r < h; ++r) plane[r * w + k] = column[r];
  }
}

SpectralTensor rfft2(const Tensor& x) {
  const Shape s = x.shape();
  require_power_of_two(s.h, "height");
  require_power_of_two(s.w, "width");
  const std::int64_t bins = SpectralTensor::bins_for(s.w);
  SpectralTensor out = SpectralTensor::zeros({s.n, s.c, s.h, bins}, s.w);
  auto y = out.values.mutable_data();
  auto in = x.data();
  std::vector<cplx> buf;
  for (std::int64_t p = 0; p < s.n * s.c; ++p) {
    forward_plane(in.data() + p * s.h * s.w, s.h, s.w, y.data() + p * s.h * 2 * bins, buf);
  }

  if (should_record({&x})) {
    out.values.set_requires_grad(true);
    // d/dx of sum_k Re(conj(g_k) X_k) is Re(sum_k g_k e^{+i theta}); that is h*w times the
    // inverse transform of g with non-redundant columns divided by their multiplicity.
    Tape::current()->record("rfft2", {x}, out.values, [x, s, bins](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      std::vector<double> scaled(static_cast<std::size_t>(s.h * 2 * bins));
      std::vector<double> plane(static_cast<std::size_t>(s.h * s.w));
      std::vector<cplx> buf;
      const double hw = static_cast<double>(s.h * s.w);
      for (std::int64_t p = 0; p < s.n * s.c; ++p) {
        const double* gp = g.data() + p * s.h * 2 * bins;
        for (std::int64_t r = 0; r < s.h; ++r) {
          for (std::int64_t k = 0; k < bins; ++k) {
            const double m = column_multiplicity(k, s.w);
            scaled[2 * (r * bins + k)] = gp[2 * (r * bins + k)] / m;
            scaled[2 * (r * bins + k) + 1] = gp[2 * (r * bins + k) + 1] / m;
          }
        }
        inverse_plane(scaled.data(), s.h, s.w, plane.data(), buf);
        for (std::int64_t i = 0; i < s.h * s.w; ++i) gx[p * s.h * s.w + i] += hw * plane[i];
      }
    });
  }
  return out;
}

Tensor irfft2(const SpectralTensor& spectrum) {
  const Shape vs = spectrum.values.shape();
  const std::int64_t width = spectrum.origin_width;
  if (width < 1 || vs.w != 2 * SpectralTensor::bins_for(width)) {
    throw ContractError("irfft2: stored width " + std::to_string(vs.w / 2) + " bins inconsistent with origin width " +
                        std::to_string(width));
  }
  require_power_of_two(vs.h, "height");
  require_power_of_two(width, "width");
  const std::int64_t bins = SpectralTensor::bins_for(width);
  const Shape s{vs.n, vs.c, vs.h, width};
  Tensor out = Tensor::zeros(s);
  auto y = out.mutable_data();
  auto in = spectrum.values.data();
  std::vector<cplx> buf;
  for (std::int64_t p = 0; p < s.n * s.c; ++p) {
    inverse_plane(in.data() + p * s.h * 2 * bins, s.h, s.w, y.data() + p * s.h * s.w, buf);
  }

  Tensor values = spectrum.values;
  if (should_record({&values})) {
    out.set_requires_grad(true);
    // Output is (1/hw) sum_k m_k Re(X_k e^{i theta}); its adjoint is (m_k / hw) * rfft2(g).
    Tape::current()->record("irfft2", {values}, out, [values, s, bins](std::span<const double> g) mutable {
      auto gv = grad_sink(values);
      std::vector<double> spec(static_cast<std::size_t>(s.h * 2 * bins));
      std::vector<cplx> buf;
      const double inv_hw = 1.0 / static_cast<double>(s.h * s.w);
      for (std::int64_t p = 0; p < s.n * s.c; ++p) {
        forward_plane(g.data() + p * s.h * s.w, s.h, s.w, spec.data(), buf);
        double* dst = gv.data() + p * s.h * 2 * bins;
        for (std::int64_t r = 0; r < s.h; ++r) {
          for (std::int64_t k = 0; k < bins; ++k) {
            const double f = column_multiplicity(k, s.w) * inv_hw;
            dst[2 * (r * bins + k)] += f * spec[2 * (r * bins + k)];
            dst[2 * (r * bins + k) + 1] += f * spec[2 * (r * bins + k) + 1];
          }
        }
      }
    });
  }
  return out;
}

SpectralTensor complex_mul(const SpectralTensor& a, const SpectralTensor& b) {
  if (!(a.values.shape() == b.values.shape()) || a.origin_width != b.origin_width) {
    throw DimensionError("complex_mul: spectral shapes " + a.spectral_shape().str() + " and " +
                         b.spectral_shape().str() + " differ");
  }
  SpectralTensor out = SpectralTensor::zeros(a.spectral_shape(), a.origin_width);
  auto y = out.values.mutable_data();
  auto x0 = a.values.data();
  auto x1 = b.values.data();
  for (std::size_t i = 0; i < y.size(); i += 2) {
    y[i] = x0[i] * x1[i] - x0[i + 1] * x1[i + 1];
    y[i + 1] = x0[i] * x1[i + 1] + x0[i + 1] * x1[i];
  }
  flops::add(flops::cost::complex_mul(static_cast<std::int64_t>(y.size() / 2)));

  Tensor va = a.values;
  Tensor vb = b.values;
  if (should_record({&va, &vb})) {
    out.values.set_requires_grad(true);
    // Gradient of a real loss w.r.t. one factor is g times the conjugate of the other.
    Tape::current()->record("complex_mul", {va, vb}, out.values, [va, vb](std::span<const double> g) mutable {
      auto ga = grad_sink(va);
      auto gb = grad_sink(vb);
      auto x0 = va.data();
      auto x1 = vb.data();
      for (std::size_t i = 0; i < g.size(); i += 2) {
        if (!ga.empty()) {
          ga[i] += g[i] * x1[i] + g[i + 1] * x1[i + 1];
          ga[i + 1] += -g[i] * x1[i + 1] + g[i + 1] * x1[i];
        }
        if (!gb.empty()) {
          gb[i] += g[i] * x0[i] + g[i + 1] * x0[i + 1];
          gb[i + 1] += -g[i] * x0[i + 1] + g[i + 1] * x0[i];
        }
      }
    });
  }
  return out;
}

}  // namespace salign::fourier
