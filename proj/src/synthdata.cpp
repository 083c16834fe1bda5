#include "salign/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "salign/errors.hpp"

namespace salign::synth {

namespace {

enum class Stream : std::uint32_t { scene = 0, affine = 1 };

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t index, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Object {
  bool ellipse = true;
  double cx = 0, cy = 0, rx = 0, ry = 0;
  std::array<double, 3> color{};
  double temperature = 0;

  bool contains(double x, double y) const {
    const double dx = (x - cx) / rx;
    const double dy = (y - cy) / ry;
    return ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
  }
};

// Axis-aligned boxes must stay this many pixels apart so every object is its
// own connected component.
constexpr double kGap = 2.0;

bool separated(const Object& a, const Object& b) {
  return std::abs(a.cx - b.cx) > a.rx + b.rx + kGap || std::abs(a.cy - b.cy) > a.ry + b.ry + kGap;
}

std::vector<Object> place_objects(const SceneSpec& spec, std::mt19937_64& rng) {
  const double S = static_cast<double>(spec.size);
  const int want = std::uniform_int_distribution<int>(spec.min_objects, spec.max_objects)(rng);
  std::vector<Object> objects;
  for (int attempt = 0; attempt < 2000 && static_cast<int>(objects.size()) < want; ++attempt) {
    // Shrink the size range on repeated failures so crowded scenes still fit.
    const double shrink = attempt < 500 ? 1.0 : 0.5;
    Object o;
    o.ellipse = std::bernoulli_distribution(0.5)(rng);
    o.rx = uniform(rng, S / 12.0, S / 5.0) * shrink;
    o.ry = uniform(rng, S / 12.0, S / 5.0) * shrink;
    // Fully inside the frame: pixel centres 0..S-1.
    o.cx = uniform(rng, o.rx + 1.0, S - 2.0 - o.rx);
    o.cy = uniform(rng, o.ry + 1.0, S - 2.0 - o.ry);
    if (std::all_of(objects.begin(), objects.end(), [&](const Object& p) { return separated(o, p); })) {
      objects.push_back(o);
    }
  }
  if (static_cast<int>(objects.size()) < spec.min_objects) {
    throw ConfigError("scene: cannot place " + std::to_string(spec.min_objects) + " separated objects in a " +
                      std::to_string(spec.size) + " px frame");
  }
  return objects;
}

double bilinear(const double* plane, std::int64_t h, std::int64_t w, double x, double y) {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const double fx = x - fx0;
  const double fy = y - fy0;
  const auto x0 = static_cast<std::int64_t>(fx0);
  const auto y0 = static_cast<std::int64_t>(fy0);
  auto tap = [&](std::int64_t yy, std::int64_t xx) {
    return (yy < 0 || yy >= h || xx < 0 || xx >= w) ? 0.0 : plane[yy * w + xx];
  };
  // Skip zero-weight taps so lattice-aligned samples are exact copies.
  double v = (1.0 - fx) * (1.0 - fy) * tap(y0, x0);
  if (fx != 0.0) v += fx * (1.0 - fy) * tap(y0, x0 + 1);
  if (fy != 0.0) v += (1.0 - fx) * fy * tap(y0 + 1, x0);
  if (fx != 0.0 && fy != 0.0) v += fx * fy * tap(y0 + 1, x0 + 1);
  return v;
}

}  // namespace

Affine Affine::similarity(double degrees, double scale, double tx, double ty) {
  const double r = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(r) * scale;
  const double s = std::sin(r) * scale;
  return {{c, -s, s, c, tx, ty}};
}

Affine Affine::inverse() const {
  const double det = determinant();
  if (std::abs(det) < 1e-6) {
    throw ParameterError("affine: singular linear part (|det| = " + std::to_string(std::abs(det)) + " < 1e-6)");
  }
  const auto& a = coeffs;
  const double i11 = a[3] / det, i12 = -a[1] / det, i21 = -a[2] / det, i22 = a[0] / det;
  return {{i11, i12, i21, i22, -(i11 * a[4] + i12 * a[5]), -(i21 * a[4] + i22 * a[5])}};
}

void SceneSpec::validate() const {
  if (size < 32 || (size & (size - 1)) != 0) {
    throw ConfigError("scene.size must be a power of two >= 32, got " + std::to_string(size));
  }
  if (min_objects < 1 || max_objects < min_objects) {
    throw ConfigError("scene object count range must satisfy 1 <= min_objects <= max_objects");
  }
  if (rgb_noise < 0.0 || thermal_noise < 0.0) throw ConfigError("scene noise levels must be >= 0");
  if (!(thermal_contrast_min > 0.0 && thermal_contrast_max >= thermal_contrast_min && thermal_contrast_max <= 0.8)) {
    throw ConfigError("scene thermal contrast range must satisfy 0 < min <= max <= 0.8");
  }
  if (!(max_translation >= 0.0 && max_translation < static_cast<double>(size) / 8.0)) {
    throw ConfigError("scene.max_translation must lie in [0, size/8)");
  }
  if (!(scale_min > 0.0 && scale_max >= scale_min)) {
    throw ConfigError("scene scale range must be positive and ordered (0 excluded)");
  }
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg < 90.0)) {
    throw ConfigError("scene.max_rotation_deg must lie in [0, 90)");
  }
}

Affine sample_affine(const SceneSpec& spec, std::uint64_t index) {
  auto rng = make_rng(spec.seed, index, Stream::affine);
  const double T = spec.max_translation;
  const double rot = uniform(rng, -spec.max_rotation_deg, spec.max_rotation_deg);
  const double scale = spec.scale_max > spec.scale_min ? uniform(rng, spec.scale_min, spec.scale_max) : spec.scale_min;
  const double tx = T > 0.0 ? uniform(rng, -T, T) : 0.0;
  const double ty = T > 0.0 ? uniform(rng, -T, T) : 0.0;
  return Affine::similarity(rot, scale, tx, ty);
}

SamplePair gen_scene(const SceneSpec& spec, std::uint64_t index) {
  return render_scene(spec, index, sample_affine(spec, index));
}

SamplePair render_scene(const SceneSpec& spec, std::uint64_t index, const Affine& affine) {
  spec.validate();
  auto rng = make_rng(spec.seed, index, Stream::scene);
  const std::int64_t S = spec.size;
  const double Sd = static_cast<double>(S);

  std::array<double, 3> bg{};
  for (double& c : bg) c = uniform(rng, 0.2, 0.5);
  std::array<double, 3> grad_x{}, grad_y{};
  for (int c = 0; c < 3; ++c) {
    grad_x[c] = uniform(rng, -0.1, 0.1);
    grad_y[c] = uniform(rng, -0.1, 0.1);
  }
  const double bg_temp = uniform(rng, 0.1, 0.2);
  const double temp_grad = uniform(rng, -0.05, 0.05);

  std::vector<Object> objects = place_objects(spec, rng);
  for (Object& o : objects) {
    do {
      for (double& c : o.color) c = uniform(rng, 0.0, 1.0);
    } while (std::abs(o.color[0] - bg[0]) + std::abs(o.color[1] - bg[1]) + std::abs(o.color[2] - bg[2]) < 0.6);
    o.temperature = bg_temp + uniform(rng, spec.thermal_contrast_min, spec.thermal_contrast_max);
  }

  SamplePair out;
  out.rgb = Tensor::zeros({1, 3, S, S});
  out.gt = Tensor::zeros({1, 1, S, S});
  Tensor field = Tensor::zeros({1, 1, S, S});
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::int64_t y = 0; y < S; ++y) {
    for (std::int64_t x = 0; x < S; ++x) {
      const double u = static_cast<double>(x) / Sd - 0.5;
      const double v = static_cast<double>(y) / Sd - 0.5;
      const Object* hit = nullptr;
      for (const Object& o : objects) {
        if (o.contains(static_cast<double>(x), static_cast<double>(y))) hit = &o;
      }
      for (int c = 0; c < 3; ++c) {
        double value = hit ? hit->color[c] : bg[c] + grad_x[c] * u + grad_y[c] * v;
        if (spec.rgb_noise > 0.0) value += spec.rgb_noise * noise(rng);
        out.rgb.at(0, c, y, x) = std::clamp(value, 0.0, 1.0);
      }
      double t = hit ? hit->temperature : bg_temp + temp_grad * (u + v);
      if (spec.thermal_noise > 0.0) t += spec.thermal_noise * noise(rng);
      field.at(0, 0, y, x) = std::clamp(t, 0.0, 1.0);
      out.gt.at(0, 0, y, x) = hit ? 1.0 : 0.0;
    }
  }

  const Tensor warped = affine_warp(field, affine);
  out.thermal = Tensor::zeros({1, 3, S, S});
  for (int c = 0; c < 3; ++c) {
    std::copy(warped.data().begin(), warped.data().end(), out.thermal.mutable_data().begin() + c * S * S);
  }
  out.true_affine = affine;
  out.objects = static_cast<int>(objects.size());
  return out;
}

Tensor affine_warp(const Tensor& img, const Affine& affine) {
  const Affine inv = affine.inverse();
  const Shape s = img.shape();
  const double cx = (static_cast<double>(s.w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(s.h) - 1.0) / 2.0;
  const auto& a = inv.coeffs;
  Tensor out = Tensor::zeros(s);
  auto dst = out.mutable_data();
  auto src = img.data();
  for (std::int64_t p = 0; p < s.n * s.c; ++p) {
    const double* plane = src.data() + p * s.plane();
    double* o = dst.data() + p * s.plane();
    for (std::int64_t y = 0; y < s.h; ++y) {
      for (std::int64_t x = 0; x < s.w; ++x) {
        const double dx = static_cast<double>(x) - cx;
        const double dy = static_cast<double>(y) - cy;
        const double sx = cx + a[0] * dx + a[1] * dy + a[4];
        const double sy = cy + a[2] * dx + a[3] * dy + a[5];
        o[y * s.w + x] = bilinear(plane, s.h, s.w, sx, sy);
      }
    }
  }
  return out;
}

int count_components(const Tensor& mask, std::int64_t n, std::int64_t c) {
  const Shape s = mask.shape();
  std::vector<int> label(static_cast<std::size_t>(s.plane()), 0);
  std::vector<std::int64_t> stack;
  int count = 0;
  for (std::int64_t start = 0; start < s.plane(); ++start) {
    if (label[start] != 0 || mask.at(n, c, start / s.w, start % s.w) <= 0.5) continue;
    ++count;
    stack.push_back(start);
    label[start] = count;
    while (!stack.empty()) {
      const std::int64_t p = stack.back();
      stack.pop_back();
      const std::int64_t y = p / s.w, x = p % s.w;
      const std::int64_t nbr[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[0] >= s.h || q[1] < 0 || q[1] >= s.w) continue;
        const std::int64_t idx = q[0] * s.w + q[1];
        if (label[idx] == 0 && mask.at(n, c, q[0], q[1]) > 0.5) {
          label[idx] = count;
          stack.push_back(idx);
        }
      }
    }
  }
  return count;
}

std::array<double, 2> centroid(const Tensor& t, double threshold, std::int64_t n, std::int64_t c) {
  const Shape s = t.shape();
  double sx = 0.0, sy = 0.0, count = 0.0;
  for (std::int64_t y = 0; y < s.h; ++y) {
    for (std::int64_t x = 0; x < s.w; ++x) {
      if (t.at(n, c, y, x) > threshold) {
        sx += static_cast<double>(x);
        sy += static_cast<double>(y);
        count += 1.0;
      }
    }
  }
  if (count == 0.0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  return {sx / count, sy / count};
}

}  // namespace salign::synth
