#include "salign/scal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "salign/errors.hpp"

namespace salign::scal {

namespace {

using autograd::grad_sink;
using autograd::should_record;

struct Maps {
  const Tensor& anchor;
  const Tensor& window;
};

Maps orient(const CompressedPair& pair, Anchor anchor) {
  if (anchor == Anchor::thermal) return {pair.thermal, pair.rgb};
  return {pair.rgb, pair.thermal};
}

void gather(std::span<const double> data, const Shape& s, std::int64_t b, std::int64_t i, std::int64_t j,
            std::span<double> out) {
  const std::int64_t P = s.plane();
  const std::int64_t base = b * s.c * P + i * s.w + j;
  for (std::int64_t c = 0; c < s.c; ++c) out[c] = data[base + c * P];
}

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

void ScalConfig::validate() const {
  if (k < 1 || k % 2 == 0) throw ConfigError("scal.k must be odd and >= 1, got " + std::to_string(k));
  if (!(t > -1.0 && t < 1.0)) throw ConfigError("scal.t must lie in (-1, 1), got " + std::to_string(t));
  if (c_compressed < 0) throw ConfigError("scal.c_compressed must be >= 0 (0 = automatic)");
  if (!(epsilon > 0.0)) throw ConfigError("scal.epsilon must be positive");
}

std::int64_t ScalConfig::compressed_channels(std::int64_t feature_channels) const {
  return c_compressed > 0 ? c_compressed : default_compressed_channels(feature_channels);
}

std::int64_t default_compressed_channels(std::int64_t feature_channels) {
  return std::max<std::int64_t>(feature_channels / 4, 2);
}

CompressedPair compress(const Tensor& f4_rgb, const Tensor& f4_thermal, const CompressParams& rgb,
                        const CompressParams& thermal) {
  if (!(f4_rgb.shape() == f4_thermal.shape())) {
    throw DimensionError("compress: modality shapes differ " + f4_rgb.shape().str() + " vs " +
                         f4_thermal.shape().str());
  }
  auto one = [](const Tensor& f, const CompressParams& p) {
    Tensor y = ops::dconv3(f, p.conv);
    return p.normalize ? ops::layer_norm(y, p.gain, p.offset) : y;
  };
  CompressedPair out{one(f4_rgb, rgb), one(f4_thermal, thermal)};
  if (!(out.rgb.shape() == out.thermal.shape())) {
    throw DimensionError("compress: compressed shapes differ " + out.rgb.shape().str() + " vs " +
                         out.thermal.shape().str());
  }
  return out;
}

std::vector<double> extract_patch(const Tensor& f, std::int64_t i, std::int64_t j, int k) {
  const Shape s = f.shape();
  if (i < 0 || i >= s.h || j < 0 || j >= s.w) {
    throw ContractError("extract_patch: position (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") outside map " + s.str());
  }
  const int r = k / 2;
  const std::int64_t kk = static_cast<std::int64_t>(k) * k;
  std::vector<double> out(static_cast<std::size_t>(s.n * s.c * kk), 0.0);
  for (std::int64_t b = 0; b < s.n; ++b) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const std::int64_t y = i + dy;
          const std::int64_t x = j + dx;
          if (y < 0 || y >= s.h || x < 0 || x >= s.w) continue;
          const std::int64_t u = (dy + r) * k + (dx + r);
          out[(b * s.c + c) * kk + u] = f.at(b, c, y, x);
        }
      }
    }
  }
  return out;
}

double cosine_sim(std::span<const double> a, std::span<const double> p, double epsilon) {
  const double na = norm2(a);
  const double np = norm2(p);
  if (na == 0.0 || np == 0.0) return 0.0;
  return dot(a, p) / (na * np + epsilon);
}

int label(double s, double t) { return s > t ? 1 : 0; }

double info_nce(std::span<const double> s, std::span<const int> labels) {
  int positives = 0;
  double pos_sum = 0.0;
  for (std::size_t u = 0; u < s.size(); ++u) {
    if (labels[u] != 0) {
      ++positives;
      pos_sum += s[u];
    }
  }
  if (positives == 0) return 0.0;
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double v : s) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  return positives * lse - pos_sum;
}

SimilarityField similarity_field(const CompressedPair& pair, const ScalConfig& cfg) {
  cfg.validate();
  if (!(pair.rgb.shape() == pair.thermal.shape())) {
    throw DimensionError("similarity_field: shapes differ " + pair.rgb.shape().str() + " vs " +
                         pair.thermal.shape().str());
  }
  const Maps maps = orient(pair, cfg.anchor);
  const Shape s = maps.anchor.shape();
  const int r = cfg.k / 2;
  const int kk = cfg.k * cfg.k;
  SimilarityField field{s.n, s.h, s.w, kk, {}, {}};
  field.s.resize(static_cast<std::size_t>(s.n * s.h * s.w * kk));
  field.l.resize(field.s.size());
  std::vector<double> a(static_cast<std::size_t>(s.c));
  std::vector<double> p(static_cast<std::size_t>(s.c));
  for (std::int64_t b = 0; b < s.n; ++b) {
    for (std::int64_t i = 0; i < s.h; ++i) {
      for (std::int64_t j = 0; j < s.w; ++j) {
        gather(maps.anchor.data(), s, b, i, j, a);
        for (int u = 0; u < kk; ++u) {
          const std::int64_t y = i + u / cfg.k - r;
          const std::int64_t x = j + u % cfg.k - r;
          double sim = 0.0;
          if (y >= 0 && y < s.h && x >= 0 && x < s.w) {
            gather(maps.window.data(), s, b, y, x, p);
            sim = cosine_sim(a, p, cfg.epsilon);
          }
          const std::size_t idx = static_cast<std::size_t>(((b * s.h + i) * s.w + j) * kk + u);
          field.s[idx] = sim;
          field.l[idx] = label(sim, cfg.t);
        }
      }
    }
  }
  return field;
}

Tensor scal_loss(const CompressedPair& pair, const ScalConfig& cfg) {
  const SimilarityField field = similarity_field(pair, cfg);
  const int kk = field.window;
  const std::int64_t anchors = field.batch * field.height * field.width;
  double total = 0.0;
  for (std::int64_t a = 0; a < anchors; ++a) {
    total += info_nce(std::span<const double>(field.s).subspan(a * kk, kk),
                      std::span<const int>(field.l).subspan(a * kk, kk));
  }
  const double inv = 1.0 / static_cast<double>(anchors);
  Tensor out = Tensor::scalar(total * inv);

  const Maps maps = orient(pair, cfg.anchor);
  Tensor anchor_map = maps.anchor;
  Tensor window_map = maps.window;
  if (should_record({&anchor_map, &window_map})) {
    out.set_requires_grad(true);
    Tape::current()->record(
        "scal_loss", {anchor_map, window_map}, out,
        [anchor_map, window_map, field, cfg, inv](std::span<const double> g) mutable {
          auto ga = grad_sink(anchor_map);
          auto gw = grad_sink(window_map);
          const Shape s = anchor_map.shape();
          const std::int64_t P = s.plane();
          const int r = cfg.k / 2;
          const int kk = field.window;
          std::vector<double> a(static_cast<std::size_t>(s.c));
          std::vector<double> p(static_cast<std::size_t>(s.c));
          std::vector<double> dloss_ds(static_cast<std::size_t>(kk));
          for (std::int64_t b = 0; b < s.n; ++b) {
            for (std::int64_t i = 0; i < s.h; ++i) {
              for (std::int64_t j = 0; j < s.w; ++j) {
                const std::size_t off = static_cast<std::size_t>(((b * s.h + i) * s.w + j) * kk);
                const double* sv = field.s.data() + off;
                const int* lv = field.l.data() + off;
                int positives = 0;
                for (int u = 0; u < kk; ++u) positives += lv[u];
                if (positives == 0) continue;
                // d/ds_u of (P * logsumexp(s) - sum l s) = P * softmax_u - l_u.
                const double mx = *std::max_element(sv, sv + kk);
                double z = 0.0;
                for (int u = 0; u < kk; ++u) z += std::exp(sv[u] - mx);
                for (int u = 0; u < kk; ++u) {
                  dloss_ds[u] = g[0] * inv * (positives * std::exp(sv[u] - mx) / z - lv[u]);
                }
                gather(anchor_map.data(), s, b, i, j, a);
                const double na = norm2(a);
                if (na == 0.0) continue;
                for (int u = 0; u < kk; ++u) {
                  const std::int64_t y = i + u / cfg.k - r;
                  const std::int64_t x = j + u % cfg.k - r;
                  if (y < 0 || y >= s.h || x < 0 || x >= s.w) continue;
                  gather(window_map.data(), s, b, y, x, p);
                  const double np = norm2(p);
                  if (np == 0.0) continue;
                  const double d = na * np + cfg.epsilon;
                  const double ap = dot(a, p);
                  const double coef_a = ap * np / (d * d * na);
                  const double coef_p = ap * na / (d * d * np);
                  const double gs = dloss_ds[u];
                  for (std::int64_t c = 0; c < s.c; ++c) {
                    if (!ga.empty()) ga[b * s.c * P + c * P + i * s.w + j] += gs * (p[c] / d - coef_a * a[c]);
                    if (!gw.empty()) gw[b * s.c * P + c * P + y * s.w + x] += gs * (a[c] / d - coef_p * p[c]);
                  }
                }
              }
            }
          }
        });
  }
  return out;
}

}  // namespace salign::scal
