#include "salign/network.hpp"

#include <cmath>
#include <string>

#include "salign/errors.hpp"
#include "salign/fourier.hpp"

namespace salign {

namespace {

using autograd::grad_sink;
using autograd::should_record;

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_loss_operands(const Tensor& logits, const Tensor& gt, const char* op) {
  if (!(logits.shape() == gt.shape())) {
    throw DimensionError(std::string(op) + ": logits " + logits.shape().str() + " vs ground truth " +
                         gt.shape().str());
  }
  for (double g : gt.data()) {
    if (!(g >= 0.0 && g <= 1.0)) throw ContractError(std::string(op) + ": ground truth outside [0, 1]");
  }
}

std::int64_t stage_stride(int level) { return level == 0 ? 4 : 2; }

std::int64_t stage_in_channels(const ModelConfig& cfg, int level) {
  return level == 0 ? 3 : cfg.encoder_channels[level - 1];
}

std::int64_t decoder_in_channels(const ModelConfig& cfg, int level) {
  return level == kLevels - 1 ? cfg.encoder_channels[level]
                              : cfg.encoder_channels[level] + cfg.encoder_channels[level + 1];
}

}  // namespace

void ModelConfig::validate() const {
  if (input_size < 32 || input_size % 32 != 0) {
    throw ConfigError("model.input_size must be a multiple of 32, got " + std::to_string(input_size));
  }
  fourier::require_power_of_two(input_size, "model.input_size");
  for (std::int64_t c : encoder_channels) {
    if (c < 1) throw ConfigError("model.encoder_channels entries must be >= 1");
  }
  if (filters < 1) throw ConfigError("model.filters must be >= 1");
  if (ffn_expansion < 1) throw ConfigError("model.ffn_expansion must be >= 1");
  if (beta1 < 0.0 || beta2 < 0.0) throw ConfigError("loss weights must be non-negative");
  scal.validate();
}

Tensor DnrLayer::apply(const Tensor& x) const { return ops::relu(norm.apply(ops::dconv3(x, conv))); }

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const auto& ch = config_.encoder_channels;

  for (int i = 0; i < kLevels; ++i) {
    const std::int64_t c_in = stage_in_channels(config_, i);
    const std::int64_t s = stage_stride(i);
    EncoderStage& st = encoder_[i];
    st.down_weight = init::normal({ch[i], c_in, s, s}, 1.0 / std::sqrt(static_cast<double>(c_in * s * s)), rng);
    st.down_bias = init::constant({1, ch[i], 1, 1}, 0.0);
    st.down_norm = NormParams::make(ch[i]);
    st.down_act = StarReluParams::make();
    for (auto& block : st.blocks) {
      block.norm = NormParams::make(ch[i]);
      block.act = StarReluParams::make();
      block.conv = init::dconv(ch[i], ch[i], rng);
    }
  }
  if (config_.use_saf) {
    for (int i = 0; i < kLevels; ++i) {
      const std::int64_t side = config_.level_side(i);
      saf_[i] = saf::SafParams::make(ch[i], side, side, config_.filters, config_.ffn_expansion, rng);
    }
  }
  for (int i = kLevels - 1; i >= 0; --i) {
    decoder_[i].conv = init::dconv(decoder_in_channels(config_, i), ch[i], rng);
    decoder_[i].norm = NormParams::make(ch[i]);
  }
  head_ = init::dconv(ch[0], 1, rng);
  if (config_.use_scal) {
    const std::int64_t cc = config_.scal.compressed_channels(ch[kLevels - 1]);
    for (scal::CompressParams* p : {&compress_rgb_, &compress_thermal_}) {
      p->conv = init::dconv(ch[kLevels - 1], cc, rng);
      const NormParams norm = NormParams::make(cc);
      p->gain = norm.gain;
      p->offset = norm.offset;
    }
  }
}

Pyramid Model::encode(const Tensor& image) const {
  const Shape s = image.shape();
  if (s.c != 3 || s.h != s.w || s.h != config_.input_size) {
    throw ConfigError("encoder expects (B, 3, " + std::to_string(config_.input_size) + ", " +
                      std::to_string(config_.input_size) + "), got " + s.str());
  }
  Pyramid out;
  Tensor x = image;
  for (int i = 0; i < kLevels; ++i) {
    const EncoderStage& st = encoder_[i];
    x = st.down_act.apply(st.down_norm.apply(ops::patch_conv(x, st.down_weight, st.down_bias)));
    for (const auto& block : st.blocks) {
      x = ops::add(x, ops::dconv3(block.act.apply(block.norm.apply(x)), block.conv));
    }
    out[i] = x;
  }
  return out;
}

Pyramid Model::fuse(const Pyramid& rgb, const Pyramid& thermal) const {
  Pyramid out;
  for (int i = 0; i < kLevels; ++i) {
    out[i] = config_.use_saf ? saf::saf_block(rgb[i], thermal[i], saf_[i]) : ops::add(rgb[i], thermal[i]);
  }
  return out;
}

Pyramid Model::decode(const Pyramid& fused) const {
  Pyramid out;
  out[kLevels - 1] = decoder_[kLevels - 1].apply(fused[kLevels - 1]);
  for (int i = kLevels - 2; i >= 0; --i) {
    out[i] = decoder_[i].apply(ops::concat_channels(fused[i], ops::upsample2(out[i + 1])));
  }
  return out;
}

Tensor Model::head(const Tensor& f1d) const { return ops::upsample2(ops::upsample2(ops::dconv3(f1d, head_))); }

ModelOutput Model::forward(const Tensor& rgb, const Tensor& thermal) const {
  ModelOutput out;
  out.rgb = encode(rgb);
  out.thermal = encode(thermal);
  out.fused = fuse(out.rgb, out.thermal);
  out.decoded = decode(out.fused);
  out.logits = head(out.decoded[0]);
  return out;
}

scal::CompressedPair Model::compress(const Tensor& f4_rgb, const Tensor& f4_thermal) const {
  if (!config_.use_scal) throw ContractError("compress: model built without the alignment loss");
  return scal::compress(f4_rgb, f4_thermal, compress_rgb_, compress_thermal_);
}

LossTerms Model::losses(const ModelOutput& out, const Tensor& gt) const {
  LossTerms terms;
  terms.bce = bce_loss(out.logits, gt);
  terms.iou = iou_loss(out.logits, gt);
  if (config_.use_scal) {
    terms.scal = scal::scal_loss(compress(out.rgb[kLevels - 1], out.thermal[kLevels - 1]), config_.scal);
  } else {
    terms.scal = Tensor::scalar(0.0);
  }
  terms.total = total_loss(terms.bce, terms.iou, terms.scal, config_.beta1, config_.beta2);
  return terms;
}

ParamList Model::parameters() const {
  ParamList out;
  for (int i = 0; i < kLevels; ++i) {
    const std::string p = "encoder.stage" + std::to_string(i);
    const EncoderStage& st = encoder_[i];
    out.emplace_back(p + ".down.weight", st.down_weight);
    out.emplace_back(p + ".down.bias", st.down_bias);
    st.down_norm.collect(out, p + ".down.norm");
    st.down_act.collect(out, p + ".down.act");
    for (std::size_t b = 0; b < st.blocks.size(); ++b) {
      const std::string bp = p + ".block" + std::to_string(b);
      st.blocks[b].norm.collect(out, bp + ".norm");
      st.blocks[b].act.collect(out, bp + ".act");
      collect_dconv(st.blocks[b].conv, out, bp + ".conv");
    }
  }
  if (config_.use_saf) {
    for (int i = 0; i < kLevels; ++i) saf_[i].collect(out, "saf" + std::to_string(i));
  }
  for (int i = kLevels - 1; i >= 0; --i) {
    const std::string p = "decoder" + std::to_string(i);
    collect_dconv(decoder_[i].conv, out, p + ".conv");
    decoder_[i].norm.collect(out, p + ".norm");
  }
  collect_dconv(head_, out, "head");
  if (config_.use_scal) {
    for (const auto& [name, p] : {std::pair{"compress.rgb", &compress_rgb_}, std::pair{"compress.thermal", &compress_thermal_}}) {
      collect_dconv(p->conv, out, std::string(name) + ".conv");
      out.emplace_back(std::string(name) + ".norm.gain", p->gain);
      out.emplace_back(std::string(name) + ".norm.offset", p->offset);
    }
  }
  return out;
}

std::int64_t parameter_count(const ModelConfig& cfg) {
  const auto& ch = cfg.encoder_channels;
  std::int64_t total = 0;
  for (int i = 0; i < kLevels; ++i) {
    const std::int64_t c = ch[i];
    const std::int64_t s = stage_stride(i);
    total += c * stage_in_channels(cfg, i) * s * s + c + 2 * c + 2;
    total += 2 * (2 * c + 2 + dconv_param_count(c, c));
    if (cfg.use_saf) {
      const std::int64_t side = cfg.level_side(i);
      total += saf::parameter_count(c, side, side, cfg.filters, cfg.ffn_expansion);
    }
    total += dconv_param_count(decoder_in_channels(cfg, i), c) + 2 * c;
  }
  total += dconv_param_count(ch[0], 1);
  if (cfg.use_scal) {
    const std::int64_t cc = cfg.scal.compressed_channels(ch[kLevels - 1]);
    total += 2 * (dconv_param_count(ch[kLevels - 1], cc) + 2 * cc);
  }
  return total;
}

Tensor bce_loss(const Tensor& logits, const Tensor& gt) {
  require_loss_operands(logits, gt, "bce_loss");
  auto s = logits.data();
  auto g = gt.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    acc += std::max(s[i], 0.0) - s[i] * g[i] + std::log1p(std::exp(-std::abs(s[i])));
  }
  const double inv = 1.0 / static_cast<double>(s.size());
  Tensor out = Tensor::scalar(acc * inv);

  if (should_record({&logits})) {
    out.set_requires_grad(true);
    Tape::current()->record("bce_loss", {logits}, out, [logits, gt, inv](std::span<const double> go) mutable {
      auto gs = grad_sink(logits);
      auto s = logits.data();
      auto g = gt.data();
      for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += go[0] * inv * (logistic(s[i]) - g[i]);
    });
  }
  return out;
}

Tensor iou_loss(const Tensor& logits, const Tensor& gt) {
  require_loss_operands(logits, gt, "iou_loss");
  const Shape sh = logits.shape();
  const std::int64_t per = sh.c * sh.h * sh.w;
  auto s = logits.data();
  auto g = gt.data();
  std::vector<double> inter(static_cast<std::size_t>(sh.n), 1.0);
  std::vector<double> uni(static_cast<std::size_t>(sh.n), 1.0);
  double acc = 0.0;
  for (std::int64_t b = 0; b < sh.n; ++b) {
    for (std::int64_t i = b * per; i < (b + 1) * per; ++i) {
      const double p = logistic(s[i]);
      inter[b] += p * g[i];
      uni[b] += p + g[i] - p * g[i];
    }
    acc += 1.0 - inter[b] / uni[b];
  }
  const double inv_n = 1.0 / static_cast<double>(sh.n);
  Tensor out = Tensor::scalar(acc * inv_n);

  if (should_record({&logits})) {
    out.set_requires_grad(true);
    Tape::current()->record(
        "iou_loss", {logits}, out, [logits, gt, inter, uni, per, inv_n](std::span<const double> go) mutable {
          auto gs = grad_sink(logits);
          auto s = logits.data();
          auto g = gt.data();
          for (std::size_t b = 0; b < inter.size(); ++b) {
            const double u2 = uni[b] * uni[b];
            for (std::int64_t i = static_cast<std::int64_t>(b) * per; i < static_cast<std::int64_t>(b + 1) * per; ++i) {
              const double p = logistic(s[i]);
              const double dl_dp = -(g[i] * uni[b] - inter[b] * (1.0 - g[i])) / u2;
              gs[i] += go[0] * inv_n * dl_dp * p * (1.0 - p);
            }
          }
        });
  }
  return out;
}

Tensor total_loss(const Tensor& bce, const Tensor& iou, const Tensor& scal, double beta1, double beta2) {
  return ops::add(ops::add(ops::scale(bce, beta1), ops::scale(iou, beta2)), scal);
}

}  // namespace salign
