#include "salign/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "salign/errors.hpp"
#include "salign/fourier.hpp"
#include "salign/gradcheck.hpp"
#include "salign/network.hpp"
#include "salign/oracles.hpp"
#include "salign/saf.hpp"
#include "salign/scal.hpp"

namespace salign::verify {
namespace {

using fourier::cplx;
using fourier::SpectralTensor;

Tensor random_tensor(Shape shape, std::uint64_t seed, double stddev = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.mutable_data()) v = dist(rng);
  return t;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor projection(const Tensor& x, std::uint64_t seed) { return ops::sum(ops::mul(x, random_tensor(x.shape(), seed))); }

std::span<const double> plane_of(const Tensor& t, std::int64_t n, std::int64_t c) {
  const auto& s = t.shape();
  return t.data().subspan(static_cast<std::size_t>((n * s.c + c) * s.plane()), static_cast<std::size_t>(s.plane()));
}

std::vector<cplx> half_bins(const SpectralTensor& s, std::int64_t n, std::int64_t c) {
  std::vector<cplx> out;
  for (std::int64_t h = 0; h < s.height(); ++h) {
    for (std::int64_t k = 0; k < s.bins(); ++k) out.push_back(s.bin(n, c, h, k));
  }
  return out;
}

std::string size_tag(std::int64_t h, std::int64_t w) { return std::to_string(h) + "x" + std::to_string(w); }

// --- fft ---------------------------------------------------------------------

double round_trip_error(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Tensor x = random_tensor({2, 3, h, w}, seed);
  return max_abs_diff(x.data(), fourier::irfft2(fourier::rfft2(x)).data());
}

double parseval_error(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Tensor x = random_tensor({1, 1, h, w}, seed);
  double energy = 0.0;
  for (double v : x.data()) energy += v * v;
  const double spectral = oracle::parseval_half_energy(half_bins(fourier::rfft2(x), 0, 0), h, w);
  return std::abs(energy - spectral) / energy;
}

double dft_oracle_error(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Tensor x = random_tensor({1, 2, h, w}, seed);
  SpectralTensor s = fourier::rfft2(x);
  double worst = 0.0;
  for (std::int64_t c = 0; c < 2; ++c) {
    const auto full = oracle::naive_dft2(plane_of(x, 0, c), h, w);
    for (std::int64_t r = 0; r < h; ++r) {
      for (std::int64_t k = 0; k < s.bins(); ++k) {
        worst = std::max(worst, std::abs(s.bin(0, c, r, k) - full[static_cast<std::size_t>(r * w + k)]));
      }
    }
    const auto inv = oracle::naive_idft2_real(full, h, w);
    worst = std::max(worst, max_abs_diff(plane_of(fourier::irfft2(s), 0, c), inv));
  }
  return worst;
}

// --- egf ---------------------------------------------------------------------

saf::SafParams make_block(std::int64_t c, std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  return saf::SafParams::make(c, h, w, 4, 2, rng);
}

std::vector<cplx> channel_filter(const Tensor& weights, const saf::SpectralFilterBank& bank, std::int64_t c) {
  const std::int64_t n_filters = bank.count(), h = bank.height(), k = bank.filters.shape().w / 2;
  std::vector<cplx> g(static_cast<std::size_t>(h * k));
  for (std::int64_t n = 0; n < n_filters; ++n) {
    const double w = weights.at(0, c * n_filters + n, 0, 0);
    for (std::int64_t r = 0; r < h; ++r) {
      for (std::int64_t b = 0; b < k; ++b) {
        g[static_cast<std::size_t>(r * k + b)] +=
            w * cplx(bank.filters.at(n, 0, r, 2 * b), bank.filters.at(n, 0, r, 2 * b + 1));
      }
    }
  }
  return g;
}

double egf_convolution_error() {
  const std::int64_t channels = 4, h = 8, w = 8;
  auto p = make_block(channels, h, w, 55);
  p.bank.filters = random_tensor(p.bank.filters.shape(), 56);
  p.bank.head_weight = random_tensor(p.bank.head_weight.shape(), 57);
  Tensor fa = random_tensor({1, channels, h, w}, 58);
  Tensor out = saf::egf_forward(fa, p.bank, p.mixer_act);
  Tensor weights = saf::egf_weights(fa, p.bank);
  Tensor act = p.mixer_act.apply(fa);
  double worst = 0.0;
  for (std::int64_t c = 0; c < channels; ++c) {
    const auto kernel =
        oracle::naive_idft2_real(oracle::expand_half_spectrum(channel_filter(weights, p.bank, c), h, w), h, w);
    worst = std::max(worst, max_abs_diff(plane_of(out, 0, c), oracle::circular_convolve2(plane_of(act, 0, c), kernel, h, w)));
  }
  return worst;
}

double egf_identity_error() {
  auto p = make_block(4, 8, 8, 50);
  p.bank.fill_filters({1.0, 0.0});
  Tensor fa = random_tensor({2, 4, 8, 8}, 51);
  return max_abs_diff(saf::egf_forward(fa, p.bank, p.mixer_act).data(), p.mixer_act.apply(fa).data());
}

double softmax_weight_error() {
  auto p = make_block(2, 4, 4, 14);
  p.bank.head_weight = Tensor::zeros(p.bank.head_weight.shape());
  std::vector<double> bias;
  for (int c = 0; c < 2; ++c) {
    for (int n = 1; n <= 4; ++n) bias.push_back(std::log(static_cast<double>(n)));
  }
  p.bank.head_bias = Tensor::from({1, 8, 1, 1}, bias);
  Tensor w = saf::egf_weights(random_tensor({1, 2, 4, 4}, 15), p.bank);
  double worst = 0.0;
  for (int c = 0; c < 2; ++c) {
    for (int n = 0; n < 4; ++n) worst = std::max(worst, std::abs(w.at(0, c * 4 + n, 0, 0) - 0.1 * (n + 1)));
  }
  return worst;
}

// --- grad --------------------------------------------------------------------

Tensor param(Shape s, std::uint64_t seed, double stddev = 1.0) { return random_tensor(s, seed, stddev); }

void add_grad(std::vector<Check>& out, const std::string& name, const std::function<Tensor()>& loss,
              const ParamList& inputs, double tol = 1e-4, GradCheckOptions opts = {}) {
  out.push_back({"grad", name, worst_error(gradcheck(loss, inputs, opts)), tol});
}

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.input_size = 32;
  cfg.encoder_channels = {4, 4, 8, 8};
  cfg.filters = 2;
  return cfg;
}

Tensor binary_gt(Shape s, std::uint64_t seed) {
  Tensor g = random_tensor(s, seed);
  for (double& v : g.mutable_data()) v = v > 0.3 ? 1.0 : 0.0;
  return g;
}

// Right shift by one column with zero fill, plus Gaussian noise.
Tensor shifted_copy(const Tensor& f, double noise, std::uint64_t seed) {
  Tensor out = random_tensor(f.shape(), seed, noise);
  const Shape s = f.shape();
  for (std::int64_t b = 0; b < s.n; ++b) {
    for (std::int64_t c = 0; c < s.c; ++c) {
      for (std::int64_t i = 0; i < s.h; ++i) {
        for (std::int64_t j = 1; j < s.w; ++j) out.at(b, c, i, j) += f.at(b, c, i, j - 1);
      }
    }
  }
  return out;
}

double correspondence_cosine(const Tensor& rgb, const Tensor& thermal) {
  const Shape s = rgb.shape();
  std::vector<double> a(static_cast<std::size_t>(s.c)), p(a.size());
  double acc = 0.0;
  std::int64_t n = 0;
  for (std::int64_t b = 0; b < s.n; ++b) {
    for (std::int64_t i = 0; i < s.h; ++i) {
      for (std::int64_t j = 1; j < s.w; ++j) {
        for (std::int64_t c = 0; c < s.c; ++c) {
          a[static_cast<std::size_t>(c)] = thermal.at(b, c, i, j);
          p[static_cast<std::size_t>(c)] = rgb.at(b, c, i, j - 1);
        }
        acc += scal::cosine_sim(a, p);
        ++n;
      }
    }
  }
  return acc / static_cast<double>(n);
}

}  // namespace

bool Check::passed() const { return std::isfinite(error) && error <= tolerance; }

std::vector<Check> fft_suite() {
  std::vector<Check> out;
  for (auto [h, w] : {std::pair<std::int64_t, std::int64_t>{8, 8}, {16, 16}, {4, 32}}) {
    out.push_back({"fft", "round_trip_" + size_tag(h, w), round_trip_error(h, w, 31 + h), 1e-10});
  }
  for (auto [h, w] : {std::pair<std::int64_t, std::int64_t>{8, 8}, {16, 16}, {4, 32}}) {
    out.push_back({"fft", "parseval_" + size_tag(h, w), parseval_error(h, w, 40 + h), 1e-8});
  }
  for (auto [h, w] : {std::pair<std::int64_t, std::int64_t>{8, 8}, {16, 16}}) {
    out.push_back({"fft", "dft_oracle_" + size_tag(h, w), dft_oracle_error(h, w, 20 + h), 1e-10});
  }
  return out;
}

std::vector<Check> egf_suite() {
  return {
      {"egf", "circular_convolution_1x4x8x8", egf_convolution_error(), 1e-8},
      {"egf", "identity_filters", egf_identity_error(), 1e-10},
      {"egf", "softmax_weights_tenths", softmax_weight_error(), 1e-12},
  };
}

std::vector<Check> scal_suite() {
  std::vector<Check> out;
  {
    scal::ScalConfig cfg;
    cfg.k = 1;
    Tensor f = random_tensor({1, 3, 4, 4}, 13);
    out.push_back({"scal", "single_candidate_window", std::abs(scal::scal_loss({f, f}, cfg).item()), 1e-9});
  }
  {
    Tensor z = Tensor::zeros({2, 4, 5, 5});
    out.push_back({"scal", "no_positives", std::abs(scal::scal_loss({z, z}, scal::ScalConfig{}).item()), 1e-9});
  }
  {
    const std::vector<double> s{1.0, 0.0};
    const std::vector<int> l{1, 0};
    out.push_back({"scal", "two_candidates_hand_value", std::abs(scal::info_nce(s, l) - 0.31326), 1e-5});
    out.push_back({"scal", "two_candidates_closed_form",
                   std::abs(scal::info_nce(s, l) - std::log(1.0 + std::exp(-1.0))), 1e-9});
  }
  {
    // Whole-map loss against a per-anchor loop over the scalar helpers.
    Tensor r = random_tensor({2, 3, 5, 6}, 14);
    Tensor t = random_tensor({2, 3, 5, 6}, 15);
    scal::ScalConfig cfg;
    cfg.t = 0.1;
    double total = 0.0;
    std::int64_t anchors = 0;
    for (std::int64_t b = 0; b < 2; ++b) {
      for (std::int64_t i = 0; i < 5; ++i) {
        for (std::int64_t j = 0; j < 6; ++j) {
          const auto window = scal::extract_patch(r, i, j, 3);
          std::vector<double> a(3), p(3), s(9);
          std::vector<int> l(9);
          for (int c = 0; c < 3; ++c) a[c] = t.at(b, c, i, j);
          for (int u = 0; u < 9; ++u) {
            for (int c = 0; c < 3; ++c) p[c] = window[static_cast<std::size_t>((b * 3 + c) * 9 + u)];
            s[u] = scal::cosine_sim(a, p);
            l[u] = scal::label(s[u], cfg.t);
          }
          total += scal::info_nce(s, l);
          ++anchors;
        }
      }
    }
    out.push_back({"scal", "loop_oracle",
                   std::abs(scal::scal_loss({r, t}, cfg).item() - total / static_cast<double>(anchors)), 1e-12});
  }
  return out;
}

std::vector<Check> grad_suite() {
  std::vector<Check> out;
  {
    Tensor a = param({1, 2, 3, 3}, 20);
    Tensor b = param({1, 2, 3, 3}, 21);
    add_grad(out, "add", [&] { return projection(ops::add(a, b), 1); }, {{"a", a}, {"b", b}});
    add_grad(out, "mul", [&] { return projection(ops::mul(a, b), 2); }, {{"a", a}, {"b", b}});
    add_grad(out, "relu", [&] { return projection(ops::relu(a), 3); }, {{"a", a}});
    add_grad(out, "sigmoid", [&] { return projection(ops::sigmoid(a), 4); }, {{"a", a}});
    add_grad(out, "scale", [&] { return projection(ops::scale(a, -1.7), 5); }, {{"a", a}});
    add_grad(out, "mean", [&] { return ops::mean(ops::mul(a, a)); }, {{"a", a}});
  }
  {
    Tensor x = param({2, 3, 4, 5}, 22);
    ops::DConvWeights w{param({3, 1, 3, 3}, 23), param({4, 3, 1, 1}, 24), param({1, 4, 1, 1}, 25)};
    add_grad(out, "dconv3", [&] { return projection(ops::dconv3(x, w), 6); },
             {{"x", x}, {"dw", w.depthwise}, {"pw", w.pointwise}, {"bias", w.bias}});
  }
  {
    Tensor x = param({2, 4, 3, 3}, 26);
    Tensor g = param({1, 4, 1, 1}, 27);
    Tensor o = param({1, 4, 1, 1}, 28);
    add_grad(out, "layer_norm", [&] { return projection(ops::layer_norm(x, g, o), 7); }, {{"x", x}, {"g", g}, {"o", o}});
    Tensor s = param({1, 1, 1, 1}, 29);
    Tensor b = param({1, 1, 1, 1}, 30);
    add_grad(out, "star_relu", [&] { return projection(ops::star_relu(x, s, b), 8); }, {{"x", x}, {"s", s}, {"b", b}});
    add_grad(out, "gap", [&] { return projection(ops::gap(x), 9); }, {{"x", x}});
  }
  {
    Tensor a = param({2, 2, 2, 4}, 31);
    Tensor b = param({2, 3, 2, 4}, 32);
    add_grad(out, "concat_channels", [&] { return projection(ops::concat_channels(a, b), 10); }, {{"a", a}, {"b", b}});
    add_grad(out, "upsample2", [&] { return projection(ops::upsample2(a), 11); }, {{"a", a}});
    Tensor w = param({5, 2, 2, 2}, 33);
    Tensor bias = param({1, 5, 1, 1}, 34);
    add_grad(out, "patch_conv", [&] { return projection(ops::patch_conv(a, w, bias), 12); },
             {{"x", a}, {"w", w}, {"bias", bias}});
    Tensor logits = param({2, 8, 1, 1}, 35);
    add_grad(out, "group_softmax", [&] { return projection(ops::group_softmax(logits, 4), 13); }, {{"x", logits}});
    Tensor m = param({5, 2, 1, 1}, 36);
    Tensor mb = param({1, 5, 1, 1}, 37);
    add_grad(out, "linear_pointwise", [&] { return projection(ops::linear_pointwise(a, m, mb), 14); },
             {{"x", a}, {"m", m}, {"bias", mb}});
  }
  {
    Tensor x = param({1, 2, 4, 8}, 38);
    Tensor g = param({1, 2, 4, 10}, 39);
    add_grad(out, "rfft2_complex_mul_irfft2",
             [&] { return projection(fourier::irfft2(fourier::complex_mul(SpectralTensor{g, 8}, fourier::rfft2(x))), 15); },
             {{"x", x}, {"filter", g}});
  }
  {
    Rng rng(6);
    scal::CompressParams pr{init::dconv(4, 2, rng), random_tensor({1, 2, 1, 1}, 7), Tensor::zeros({1, 2, 1, 1}), true};
    scal::CompressParams pt{init::dconv(4, 2, rng), Tensor::full({1, 2, 1, 1}, 1.0), random_tensor({1, 2, 1, 1}, 8),
                            true};
    Tensor xr = param({1, 4, 4, 4}, 9);
    Tensor xt = param({1, 4, 4, 4}, 10);
    add_grad(out, "compress",
             [&] {
               auto c = scal::compress(xr, xt, pr, pt);
               return ops::add(projection(c.rgb, 16), projection(c.thermal, 17));
             },
             {{"xr", xr}, {"xt", xt}, {"rgb.dw", pr.conv.depthwise}, {"rgb.pw", pr.conv.pointwise},
              {"rgb.gain", pr.gain}, {"thermal.offset", pt.offset}});
  }
  for (auto anchor : {scal::Anchor::thermal, scal::Anchor::rgb}) {
    Tensor r = param({1, 4, 5, 5}, 21);
    Tensor t = param({1, 4, 5, 5}, 22);
    scal::ScalConfig cfg;
    cfg.t = 0.2;
    cfg.anchor = anchor;
    add_grad(out, anchor == scal::Anchor::thermal ? "scal_loss_thermal_anchor" : "scal_loss_rgb_anchor",
             [&] { return scal::scal_loss({r, t}, cfg); }, {{"rgb", r}, {"thermal", t}});
  }
  {
    auto p = make_block(3, 4, 8, 63);
    p.bank.filters = random_tensor(p.bank.filters.shape(), 64);
    Tensor fa = param({2, 3, 4, 8}, 65);
    add_grad(out, "egf_forward", [&] { return projection(saf::egf_forward(fa, p.bank, p.mixer_act), 66); },
             {{"fa", fa}, {"filters", p.bank.filters}, {"head.weight", p.bank.head_weight},
              {"head.bias", p.bank.head_bias}, {"act.s", p.mixer_act.s}, {"act.b", p.mixer_act.b}});
  }
  {
    auto p = make_block(4, 8, 8, 77);
    int i = 0;
    for (NormParams* n : {&p.norm_rgb, &p.norm_thermal, &p.norm_ffn}) {
      n->gain = random_tensor({1, 4, 1, 1}, 78 + i++, 0.5);
      n->offset = random_tensor({1, 4, 1, 1}, 78 + i++, 0.5);
    }
    p.bank.filters = random_tensor(p.bank.filters.shape(), 79, 0.5);
    Tensor r = param({1, 4, 8, 8}, 80);
    Tensor t = param({1, 4, 8, 8}, 81);
    ParamList probe{{"rgb", r}, {"thermal", t}};
    p.collect(probe, "saf");
    GradCheckOptions opts;
    opts.max_entries = 24;
    opts.seed = 83;
    add_grad(out, "saf_block", [&] { return projection(saf::saf_block(r, t, p), 82); }, probe, 1e-4, opts);
  }
  {
    const ModelConfig cfg = tiny_model();
    Model model(cfg, 12);
    Pyramid fused;
    for (int i = 0; i < kLevels; ++i) {
      const std::int64_t s = cfg.level_side(i);
      fused[i] = param({1, cfg.encoder_channels[i], s, s}, 13 + i);
    }
    ParamList probe;
    for (int i = 1; i < kLevels; ++i) probe.emplace_back("fused" + std::to_string(i), fused[i]);
    for (auto& [name, t] : model.parameters()) {
      if (name.rfind("decoder", 0) == 0) probe.emplace_back(name, t);
    }
    add_grad(out, "decoder", [&] { return projection(model.decode(fused)[0], 20); }, probe);
  }
  {
    Tensor logits = param({2, 1, 4, 4}, 28, 2.0);
    Tensor gt = binary_gt(logits.shape(), 29);
    add_grad(out, "bce_loss", [&] { return bce_loss(logits, gt); }, {{"logits", logits}});
    add_grad(out, "iou_loss", [&] { return iou_loss(logits, gt); }, {{"logits", logits}});
  }
  {
    Model model(tiny_model(), 42);
    for (auto& block : model.saf_blocks()) block.bank.filters = random_tensor(block.bank.filters.shape(), 43, 0.3);
    Tensor rgb = param({1, 3, 32, 32}, 44);
    Tensor th = param({1, 3, 32, 32}, 45);
    Tensor gt = binary_gt({1, 1, 32, 32}, 46);
    ParamList probe = model.parameters();
    probe.emplace_back("input.rgb", rgb);
    GradCheckOptions opts;
    opts.max_entries = 6;
    opts.seed = 47;
    add_grad(out, "total_loss_end_to_end", [&] { return model.losses(model.forward(rgb, th), gt).total; }, probe, 1e-3,
             opts);
  }
  return out;
}

std::vector<Check> run(std::string_view level) {
  if (level == "fft") return fft_suite();
  if (level == "egf") return egf_suite();
  if (level == "scal") return scal_suite();
  if (level == "grad") return grad_suite();
  if (level == "all") {
    std::vector<Check> out;
    for (auto suite : {fft_suite, egf_suite, scal_suite, grad_suite}) {
      auto part = suite();
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  throw ConfigError("unknown verify level '" + std::string(level) + "' (expected fft, egf, scal, grad or all)");
}

std::string format(const Check& check) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s  %-5s %-32s error %.3e  tol %.0e", check.passed() ? "PASS" : "FAIL",
                check.suite.c_str(), check.name.c_str(), check.error, check.tolerance);
  return buf;
}

bool all_passed(const std::vector<Check>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed(); });
}

AlignmentRun scal_alignment(int channels, int side, double noise, int steps, double lr, unsigned long long seed) {
  Tensor r = random_tensor({1, channels, side, side}, seed - 1);
  Tensor t = shifted_copy(r, noise, seed);
  r.set_requires_grad(true);
  t.set_requires_grad(true);
  const scal::ScalConfig cfg;
  AlignmentRun run;
  run.steps = steps;
  run.initial_cosine = correspondence_cosine(r, t);
  double prev = 0.0;
  for (int step = 0; step <= steps; ++step) {
    r.zero_grad();
    t.zero_grad();
    Tape tape;
    Tensor loss = scal::scal_loss({r, t}, cfg);
    const double value = loss.item();
    if (step == 0) run.initial_loss = value;
    if (step > 0 && value > prev) ++run.loss_increases;
    prev = value;
    // The value after `steps` updates is measured, not followed by another update.
    if (step == steps) break;
    tape.backward(loss);
    for (Tensor* x : {&r, &t}) {
      const auto g = x->grad();
      auto v = x->mutable_data();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    }
  }
  run.final_loss = prev;
  run.final_cosine = correspondence_cosine(r, t);
  return run;
}

}  // namespace salign::verify
