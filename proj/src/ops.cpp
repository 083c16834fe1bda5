#include "salign/ops.hpp"

#include <algorithm>
#include <cmath>

#include "salign/errors.hpp"
#include "salign/flop_counter.hpp"

namespace salign::ops {

namespace {

using autograd::grad_sink;
using autograd::should_record;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

void require_shape(const Tensor& t, const Shape& expected, const char* op, const char* what) {
  if (!(t.shape() == expected)) {
    throw DimensionError(std::string(op) + ": " + what + " has shape " + t.shape().str() + ", expected " +
                         expected.str());
  }
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor elementwise(Elementwise kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case Elementwise::add:
      return add(a, b);
    case Elementwise::mul:
      return mul(a, b);
    case Elementwise::relu:
      return relu(a);
    case Elementwise::sigmoid:
      return sigmoid(a);
  }
  throw ContractError("unknown elementwise kind");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  auto y = out.mutable_data();
  auto x0 = a.data();
  auto x1 = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x0[i] + x1[i];
  flops::add(flops::cost::elementwise(a.numel()));

  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    Tape::current()->record("add", {a, b}, out, [a, b](std::span<const double> g) mutable {
      for (const Tensor* t : {&a, &b}) {
        auto sink = grad_sink(*t);
        for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  auto y = out.mutable_data();
  auto x0 = a.data();
  auto x1 = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x0[i] * x1[i];
  flops::add(flops::cost::elementwise(a.numel()));

  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    Tape::current()->record("mul", {a, b}, out, [a, b](std::span<const double> g) mutable {
      auto ga = grad_sink(a);
      auto gb = grad_sink(b);
      auto va = a.data();
      auto vb = b.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * vb[i];
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * va[i];
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto y = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = v[i] > 0.0 ? v[i] : 0.0;
  flops::add(flops::cost::elementwise(x.numel()));

  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record("relu", {x}, out, [x](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      auto v = x.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += v[i] > 0.0 ? g[i] : 0.0;
    });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto y = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = logistic(v[i]);
  flops::add(flops::cost::sigmoid(x.numel()));

  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record("sigmoid", {x}, out, [x, out](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      auto s = out.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * s[i] * (1.0 - s[i]);
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out = Tensor::zeros(x.shape());
  auto y = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = factor * v[i];
  flops::add(flops::cost::elementwise(x.numel()));

  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record("scale", {x}, out, [x, factor](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * g[i];
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  flops::add(flops::cost::elementwise(x.numel()));

  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record("sum", {x}, out, [x](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      for (double& v : gx) v += g[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor depthwise3x3(const Tensor& x, const Tensor& kernel) {
  const Shape s = x.shape();
  require_shape(kernel, {s.c, 1, 3, 3}, "depthwise3x3", "kernel");
  Tensor out = Tensor::zeros(s);
  auto y = out.mutable_data();
  auto in = x.data();
  auto k = kernel.data();
  const std::int64_t H = s.h;
  const std::int64_t W = s.w;

  for (std::int64_t b = 0; b < s.n; ++b) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      const double* src = in.data() + (b * s.c + c) * H * W;
      double* dst = y.data() + (b * s.c + c) * H * W;
      const double* kc = k.data() + c * 9;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const double kv = kc[(dy + 1) * 3 + (dx + 1)];
          const std::int64_t h0 = std::max<std::int64_t>(0, -dy);
          const std::int64_t h1 = std::min<std::int64_t>(H, H - dy);
          const std::int64_t w0 = std::max<std::int64_t>(0, -dx);
          const std::int64_t w1 = std::min<std::int64_t>(W, W - dx);
          for (std::int64_t h = h0; h < h1; ++h) {
            const double* row = src + (h + dy) * W + dx;
            double* orow = dst + h * W;
            for (std::int64_t w = w0; w < w1; ++w) orow[w] += kv * row[w];
          }
        }
      }
    }
  }
  flops::add(flops::cost::depthwise3x3(s.numel()));

  if (should_record({&x, &kernel})) {
    out.set_requires_grad(true);
    Tape::current()->record("depthwise3x3", {x, kernel}, out, [x, kernel, s](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      auto gk = grad_sink(kernel);
      auto in = x.data();
      auto k = kernel.data();
      const std::int64_t H = s.h;
      const std::int64_t W = s.w;
      for (std::int64_t b = 0; b < s.n; ++b) {
        for (std::int64_t c = 0; c < s.c; ++c) {
          const std::int64_t base = (b * s.c + c) * H * W;
          const double* gy = g.data() + base;
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const int tap = (dy + 1) * 3 + (dx + 1);
              const double kv = k[c * 9 + tap];
              const std::int64_t h0 = std::max<std::int64_t>(0, -dy);
              const std::int64_t h1 = std::min<std::int64_t>(H, H - dy);
              const std::int64_t w0 = std::max<std::int64_t>(0, -dx);
              const std::int64_t w1 = std::min<std::int64_t>(W, W - dx);
              double acc = 0.0;
              for (std::int64_t h = h0; h < h1; ++h) {
                const std::int64_t src_row = base + (h + dy) * W + dx;
                for (std::int64_t w = w0; w < w1; ++w) {
                  if (!gx.empty()) gx[src_row + w] += kv * gy[h * W + w];
                  acc += in[src_row + w] * gy[h * W + w];
                }
              }
              if (!gk.empty()) gk[c * 9 + tap] += acc;
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor linear_pointwise(const Tensor& x, const Tensor& matrix, const Tensor& bias) {
  const Shape s = x.shape();
  const Shape m = matrix.shape();
  if (m.h != 1 || m.w != 1 || m.c != s.c) {
    throw DimensionError("linear_pointwise: matrix " + m.str() + " incompatible with input " + s.str());
  }
  const std::int64_t c_out = m.n;
  if (bias.defined()) require_shape(bias, {1, c_out, 1, 1}, "linear_pointwise", "bias");
  const Shape os{s.n, c_out, s.h, s.w};
  const std::int64_t P = s.plane();
  Tensor out = Tensor::zeros(os);
  auto y = out.mutable_data();
  auto in = x.data();
  auto mat = matrix.data();

  for (std::int64_t b = 0; b < s.n; ++b) {
    for (std::int64_t o = 0; o < c_out; ++o) {
      double* dst = y.data() + (b * c_out + o) * P;
      if (bias.defined()) std::fill(dst, dst + P, bias.data()[o]);
      for (std::int64_t i = 0; i < s.c; ++i) {
        const double mv = mat[o * s.c + i];
        const double* src = in.data() + (b * s.c + i) * P;
        for (std::int64_t p = 0; p < P; ++p) dst[p] += mv * src[p];
      }
    }
  }
  flops::add(flops::cost::pointwise(s.n, s.c, c_out, P, bias.defined()));

  if (should_record({&x, &matrix, &bias})) {
    out.set_requires_grad(true);
    std::vector<Tensor> inputs{x, matrix};
    if (bias.defined()) inputs.push_back(bias);
    Tape::current()->record(
        "linear_pointwise", std::move(inputs), out, [x, matrix, bias, s, c_out, P](std::span<const double> g) mutable {
          auto gx = grad_sink(x);
          auto gm = grad_sink(matrix);
          auto gb = grad_sink(bias);
          auto in = x.data();
          auto mat = matrix.data();
          for (std::int64_t b = 0; b < s.n; ++b) {
            for (std::int64_t o = 0; o < c_out; ++o) {
              const double* gy = g.data() + (b * c_out + o) * P;
              if (!gb.empty()) {
                double acc = 0.0;
                for (std::int64_t p = 0; p < P; ++p) acc += gy[p];
                gb[o] += acc;
              }
              for (std::int64_t i = 0; i < s.c; ++i) {
                const std::int64_t base = (b * s.c + i) * P;
                if (!gm.empty()) {
                  double acc = 0.0;
                  for (std::int64_t p = 0; p < P; ++p) acc += gy[p] * in[base + p];
                  gm[o * s.c + i] += acc;
                }
                if (!gx.empty()) {
                  const double mv = mat[o * s.c + i];
                  for (std::int64_t p = 0; p < P; ++p) gx[base + p] += mv * gy[p];
                }
              }
            }
          }
        });
  }
  return out;
}

Tensor dconv3(const Tensor& x, const DConvWeights& w) {
  if (w.depthwise.shape().n != x.shape().c) {
    throw DimensionError("dconv3: depthwise kernel " + w.depthwise.shape().str() + " does not match input channels of " +
                         x.shape().str());
  }
  return linear_pointwise(depthwise3x3(x, w.depthwise), w.pointwise, w.bias);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset) {
  const Shape s = x.shape();
  if (s.c < 1) throw DimensionError("layer_norm: needs at least one channel, got " + s.str());
  require_shape(gain, {1, s.c, 1, 1}, "layer_norm", "gain");
  require_shape(offset, {1, s.c, 1, 1}, "layer_norm", "offset");
  const std::int64_t P = s.plane();
  const double inv_c = 1.0 / static_cast<double>(s.c);

  Tensor out = Tensor::zeros(s);
  // Normalized values and inverse std are kept for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(s.numel()));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(s.n * P));
  auto y = out.mutable_data();
  auto in = x.data();
  auto ga = gain.data();
  auto of = offset.data();

  std::vector<double> mu(static_cast<std::size_t>(P));
  std::vector<double> var(static_cast<std::size_t>(P));
  for (std::int64_t b = 0; b < s.n; ++b) {
    std::fill(mu.begin(), mu.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    const std::int64_t base = b * s.c * P;
    for (std::int64_t c = 0; c < s.c; ++c) {
      for (std::int64_t p = 0; p < P; ++p) mu[p] += in[base + c * P + p];
    }
    for (std::int64_t p = 0; p < P; ++p) mu[p] *= inv_c;
    for (std::int64_t c = 0; c < s.c; ++c) {
      for (std::int64_t p = 0; p < P; ++p) {
        const double d = in[base + c * P + p] - mu[p];
        var[p] += d * d;
      }
    }
    for (std::int64_t p = 0; p < P; ++p) (*inv_std)[b * P + p] = 1.0 / std::sqrt(var[p] * inv_c + kLayerNormEps);
    for (std::int64_t c = 0; c < s.c; ++c) {
      for (std::int64_t p = 0; p < P; ++p) {
        const std::int64_t i = base + c * P + p;
        const double xh = (in[i] - mu[p]) * (*inv_std)[b * P + p];
        (*xhat)[i] = xh;
        y[i] = ga[c] * xh + of[c];
      }
    }
  }
  flops::add(flops::cost::layer_norm(s.numel()));

  if (should_record({&x, &gain, &offset})) {
    out.set_requires_grad(true);
    Tape::current()->record(
        "layer_norm", {x, gain, offset}, out,
        [x, gain, offset, xhat, inv_std, s, P, inv_c](std::span<const double> g) mutable {
          auto gx = grad_sink(x);
          auto gg = grad_sink(gain);
          auto go = grad_sink(offset);
          auto ga = gain.data();
          std::vector<double> m1(static_cast<std::size_t>(P));
          std::vector<double> m2(static_cast<std::size_t>(P));
          for (std::int64_t b = 0; b < s.n; ++b) {
            const std::int64_t base = b * s.c * P;
            std::fill(m1.begin(), m1.end(), 0.0);
            std::fill(m2.begin(), m2.end(), 0.0);
            for (std::int64_t c = 0; c < s.c; ++c) {
              double acc_g = 0.0;
              double acc_o = 0.0;
              for (std::int64_t p = 0; p < P; ++p) {
                const std::int64_t i = base + c * P + p;
                const double gxh = g[i] * ga[c];
                m1[p] += gxh;
                m2[p] += gxh * (*xhat)[i];
                acc_g += g[i] * (*xhat)[i];
                acc_o += g[i];
              }
              if (!gg.empty()) gg[c] += acc_g;
              if (!go.empty()) go[c] += acc_o;
            }
            if (gx.empty()) continue;
            for (std::int64_t c = 0; c < s.c; ++c) {
              for (std::int64_t p = 0; p < P; ++p) {
                const std::int64_t i = base + c * P + p;
                const double gxh = g[i] * ga[c];
                gx[i] += (*inv_std)[b * P + p] * (gxh - m1[p] * inv_c - (*xhat)[i] * m2[p] * inv_c);
              }
            }
          }
        });
  }
  return out;
}

Tensor star_relu(const Tensor& x, const Tensor& s, const Tensor& b) {
  if (s.numel() != 1 || b.numel() != 1) throw DimensionError("star_relu: scale and bias must be scalars");
  const double sv = s.item();
  const double bv = b.item();
  Tensor out = Tensor::zeros(x.shape());
  auto y = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = v[i] > 0.0 ? v[i] : 0.0;
    y[i] = sv * r * r + bv;
  }
  flops::add(flops::cost::star_relu(x.numel()));

  if (should_record({&x, &s, &b})) {
    out.set_requires_grad(true);
    Tape::current()->record("star_relu", {x, s, b}, out, [x, s, b, sv](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      auto gs = grad_sink(s);
      auto gb = grad_sink(b);
      auto v = x.data();
      double acc_s = 0.0;
      double acc_b = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = v[i] > 0.0 ? v[i] : 0.0;
        if (!gx.empty()) gx[i] += g[i] * 2.0 * sv * r;
        acc_s += g[i] * r * r;
        acc_b += g[i];
      }
      if (!gs.empty()) gs[0] += acc_s;
      if (!gb.empty()) gb[0] += acc_b;
    });
  }
  return out;
}

Tensor gap(const Tensor& x) {
  const Shape s = x.shape();
  const std::int64_t P = s.plane();
  if (P < 1) throw DimensionError("gap: empty spatial extent in " + s.str());
  Tensor out = Tensor::zeros({s.n, s.c, 1, 1});
  auto y = out.mutable_data();
  auto in = x.data();
  for (std::int64_t bc = 0; bc < s.n * s.c; ++bc) {
    double acc = 0.0;
    for (std::int64_t p = 0; p < P; ++p) acc += in[bc * P + p];
    y[bc] = acc / static_cast<double>(P);
  }
  flops::add(flops::cost::gap(s.numel()));

  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record("gap", {x}, out, [x, s, P](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      const double inv = 1.0 / static_cast<double>(P);
      for (std::int64_t bc = 0; bc < s.n * s.c; ++bc) {
        for (std::int64_t p = 0; p < P; ++p) gx[bc * P + p] += g[bc] * inv;
      }
    });
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw DimensionError("concat_channels: incompatible shapes " + sa.str() + " and " + sb.str());
  }
  const Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  const std::int64_t P = sa.plane();
  Tensor out = Tensor::zeros(so);
  auto y = out.mutable_data();
  for (std::int64_t n = 0; n < sa.n; ++n) {
    std::copy_n(a.data().begin() + n * sa.c * P, sa.c * P, y.begin() + n * so.c * P);
    std::copy_n(b.data().begin() + n * sb.c * P, sb.c * P, y.begin() + (n * so.c + sa.c) * P);
  }

  if (should_record({&a, &b})) {
    out.set_requires_grad(true);
    Tape::current()->record("concat_channels", {a, b}, out, [a, b, sa, sb, so, P](std::span<const double> g) mutable {
      auto ga = grad_sink(a);
      auto gb = grad_sink(b);
      for (std::int64_t n = 0; n < sa.n; ++n) {
        for (std::int64_t i = 0; i < sa.c * P && !ga.empty(); ++i) ga[n * sa.c * P + i] += g[n * so.c * P + i];
        for (std::int64_t i = 0; i < sb.c * P && !gb.empty(); ++i) {
          gb[n * sb.c * P + i] += g[(n * so.c + sa.c) * P + i];
        }
      }
    });
  }
  return out;
}

Tensor upsample2(const Tensor& x) {
  const Shape s = x.shape();
  const Shape so{s.n, s.c, 2 * s.h, 2 * s.w};
  Tensor out = Tensor::zeros(so);
  auto y = out.mutable_data();
  auto in = x.data();
  for (std::int64_t bc = 0; bc < s.n * s.c; ++bc) {
    for (std::int64_t h = 0; h < so.h; ++h) {
      for (std::int64_t w = 0; w < so.w; ++w) {
        y[(bc * so.h + h) * so.w + w] = in[(bc * s.h + h / 2) * s.w + w / 2];
      }
    }
  }

  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record("upsample2", {x}, out, [x, s, so](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      for (std::int64_t bc = 0; bc < s.n * s.c; ++bc) {
        for (std::int64_t h = 0; h < so.h; ++h) {
          for (std::int64_t w = 0; w < so.w; ++w) {
            gx[(bc * s.h + h / 2) * s.w + w / 2] += g[(bc * so.h + h) * so.w + w];
          }
        }
      }
    });
  }
  return out;
}

Tensor patch_conv(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const Shape s = x.shape();
  const Shape ws = weight.shape();
  const std::int64_t k = ws.h;
  if (ws.c != s.c || ws.w != k || k < 1) {
    throw DimensionError("patch_conv: weight " + ws.str() + " incompatible with input " + s.str());
  }
  if (s.h % k != 0 || s.w % k != 0) {
    throw DimensionError("patch_conv: input " + s.str() + " not divisible by stride " + std::to_string(k));
  }
  require_shape(bias, {1, ws.n, 1, 1}, "patch_conv", "bias");
  const Shape so{s.n, ws.n, s.h / k, s.w / k};
  Tensor out = Tensor::zeros(so);
  auto y = out.mutable_data();
  auto in = x.data();
  auto wt = weight.data();

  for (std::int64_t b = 0; b < s.n; ++b) {
    for (std::int64_t o = 0; o < so.c; ++o) {
      double* dst = y.data() + (b * so.c + o) * so.h * so.w;
      std::fill(dst, dst + so.h * so.w, bias.data()[o]);
      for (std::int64_t ci = 0; ci < s.c; ++ci) {
        const double* src = in.data() + (b * s.c + ci) * s.h * s.w;
        for (std::int64_t dy = 0; dy < k; ++dy) {
          for (std::int64_t dx = 0; dx < k; ++dx) {
            const double wv = wt[((o * s.c + ci) * k + dy) * k + dx];
            for (std::int64_t i = 0; i < so.h; ++i) {
              const double* row = src + (i * k + dy) * s.w + dx;
              double* orow = dst + i * so.w;
              for (std::int64_t j = 0; j < so.w; ++j) orow[j] += wv * row[j * k];
            }
          }
        }
      }
    }
  }
  flops::add(flops::cost::patch_conv(s.n, s.c, so.c, k, so.h * so.w));

  if (should_record({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    Tape::current()->record(
        "patch_conv", {x, weight, bias}, out, [x, weight, bias, s, so, k](std::span<const double> g) mutable {
          auto gx = grad_sink(x);
          auto gw = grad_sink(weight);
          auto gb = grad_sink(bias);
          auto in = x.data();
          auto wt = weight.data();
          for (std::int64_t b = 0; b < s.n; ++b) {
            for (std::int64_t o = 0; o < so.c; ++o) {
              const double* gy = g.data() + (b * so.c + o) * so.h * so.w;
              if (!gb.empty()) {
                double acc = 0.0;
                for (std::int64_t p = 0; p < so.h * so.w; ++p) acc += gy[p];
                gb[o] += acc;
              }
              for (std::int64_t ci = 0; ci < s.c; ++ci) {
                const std::int64_t src_base = (b * s.c + ci) * s.h * s.w;
                for (std::int64_t dy = 0; dy < k; ++dy) {
                  for (std::int64_t dx = 0; dx < k; ++dx) {
                    const std::int64_t widx = ((o * s.c + ci) * k + dy) * k + dx;
                    const double wv = wt[widx];
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < so.h; ++i) {
                      for (std::int64_t j = 0; j < so.w; ++j) {
                        const std::int64_t si = src_base + (i * k + dy) * s.w + j * k + dx;
                        acc += gy[i * so.w + j] * in[si];
                        if (!gx.empty()) gx[si] += wv * gy[i * so.w + j];
                      }
                    }
                    if (!gw.empty()) gw[widx] += acc;
                  }
                }
              }
            }
          }
        });
  }
  return out;
}

Tensor group_softmax(const Tensor& x, std::int64_t group) {
  const Shape s = x.shape();
  if (group < 1 || s.h != 1 || s.w != 1 || s.c % group != 0) {
    throw DimensionError("group_softmax: shape " + s.str() + " cannot be split into groups of " +
                         std::to_string(group));
  }
  Tensor out = Tensor::zeros(s);
  auto y = out.mutable_data();
  auto in = x.data();
  for (std::int64_t start = 0; start < s.numel(); start += group) {
    double mx = in[start];
    for (std::int64_t i = 1; i < group; ++i) mx = std::max(mx, in[start + i]);
    double z = 0.0;
    for (std::int64_t i = 0; i < group; ++i) {
      y[start + i] = std::exp(in[start + i] - mx);
      z += y[start + i];
    }
    for (std::int64_t i = 0; i < group; ++i) y[start + i] /= z;
  }
  flops::add(flops::cost::group_softmax(s.numel()));

  if (should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record("group_softmax", {x}, out, [x, out, group](std::span<const double> g) mutable {
      auto gx = grad_sink(x);
      auto p = out.data();
      for (std::size_t start = 0; start < p.size(); start += static_cast<std::size_t>(group)) {
        double dot = 0.0;
        for (std::int64_t i = 0; i < group; ++i) dot += g[start + i] * p[start + i];
        for (std::int64_t i = 0; i < group; ++i) gx[start + i] += p[start + i] * (g[start + i] - dot);
      }
    });
  }
  return out;
}

}  // namespace salign::ops
