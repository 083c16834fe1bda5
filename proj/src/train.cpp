#include "salign/train.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "salign/errors.hpp"

namespace salign::train {

namespace {

constexpr const char* kParamPrefix = "param/";
constexpr const char* kFirstMomentPrefix = "adam.m/";
constexpr const char* kSecondMomentPrefix = "adam.v/";

void copy_values(const Tensor& src, Tensor dst, const std::string& name) {
  if (!(src.shape() == dst.shape())) {
    throw DimensionError("checkpoint tensor '" + name + "' has shape " + src.shape().str() + ", model expects " +
                         dst.shape().str());
  }
  std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
}

std::string first_non_finite(const Tape& tape) {
  const auto& nodes = tape.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!all_finite(nodes[i].output.data())) {
      return "first produced by op '" + nodes[i].kind + "' (tape node " + std::to_string(i + 1) + " of " +
             std::to_string(nodes.size()) + ")";
    }
  }
  return "present before any recorded op (inputs or parameters)";
}

std::mt19937_64 epoch_rng(std::uint64_t seed, std::int64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x7a11u};
  return std::mt19937_64(seq);
}

}  // namespace

Adam::Adam(ParamList params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (const auto& [name, p] : params_) {
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void Adam::step(double lr) {
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    auto m = m_[i].mutable_data();
    auto v = v_[i].mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + options_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

void Adam::restore(std::int64_t steps, std::span<const Tensor> m, std::span<const Tensor> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw DimensionError("optimizer state has " + std::to_string(m.size()) + " moments for " +
                         std::to_string(params_.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    copy_values(m[i], m_[i], params_[i].first);
    copy_values(v[i], v_[i], params_[i].first);
  }
  steps_ = steps;
}

AdamOptions adam_options(const TrainConfig& config) {
  return {config.adam_beta1, config.adam_beta2, config.adam_epsilon};
}

ckpt::Checkpoint make_checkpoint(const Model& model, const Adam* adam, std::int64_t epoch) {
  ckpt::Checkpoint c;
  c.meta["kind"] = "salign.model";
  c.meta["model"] = to_json(model.config());
  c.meta["epoch"] = epoch;
  c.meta["adam_step"] = adam ? adam->steps() : 0;
  const ParamList params = model.parameters();
  for (const auto& [name, t] : params) c.tensors.push_back({kParamPrefix + name, t});
  if (adam != nullptr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      c.tensors.push_back({kFirstMomentPrefix + params[i].first, adam->first_moment()[i]});
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      c.tensors.push_back({kSecondMomentPrefix + params[i].first, adam->second_moment()[i]});
    }
  }
  return c;
}

Model model_from_checkpoint(const ckpt::Checkpoint& checkpoint) {
  if (!checkpoint.meta.contains("model")) throw ConfigError("checkpoint meta has no model configuration");
  const ModelConfig cfg = model_config_from_json(nlohmann::json::parse(checkpoint.meta["model"].dump()));
  Model model(cfg, 0);
  load_parameters(model, checkpoint);
  return model;
}

void load_parameters(const Model& model, const ckpt::Checkpoint& checkpoint) {
  std::size_t expected = 0;
  for (const auto& [name, t] : model.parameters()) {
    copy_values(checkpoint.find(kParamPrefix + name), t, name);
    ++expected;
  }
  std::size_t stored = 0;
  for (const auto& e : checkpoint.tensors) stored += e.name.rfind(kParamPrefix, 0) == 0 ? 1 : 0;
  if (stored != expected) {
    throw DimensionError("checkpoint holds " + std::to_string(stored) + " parameters, model has " +
                         std::to_string(expected));
  }
}

void load_optimizer(Adam& adam, const ckpt::Checkpoint& checkpoint) {
  std::vector<Tensor> m, v;
  for (const auto& [name, t] : adam.params()) {
    m.push_back(checkpoint.find(kFirstMomentPrefix + name));
    v.push_back(checkpoint.find(kSecondMomentPrefix + name));
  }
  adam.restore(checkpoint.meta.value("adam_step", std::int64_t{0}), m, v);
}

Tensor augment(const Tensor& t, Augment aug) {
  const Shape s = t.shape();
  if (s.h != s.w) throw DimensionError("augment: expects square planes, got " + s.str());
  const std::int64_t S = s.w;
  const int turns = ((aug.quarter_turns % 4) + 4) % 4;
  if (!aug.flip && turns == 0) return t.detach();
  Tensor out = Tensor::zeros(s);
  auto src = t.data();
  auto dst = out.mutable_data();
  for (std::int64_t p = 0; p < s.n * s.c; ++p) {
    const double* in = src.data() + p * S * S;
    double* o = dst.data() + p * S * S;
    for (std::int64_t y = 0; y < S; ++y) {
      for (std::int64_t x = 0; x < S; ++x) {
        // Map the output pixel back through the rotations, then the flip.
        std::int64_t sy = y, sx = x;
        for (int r = 0; r < turns; ++r) {
          const std::int64_t ny = sx;
          const std::int64_t nx = S - 1 - sy;
          sy = ny;
          sx = nx;
        }
        if (aug.flip) sx = S - 1 - sx;
        o[y * S + x] = in[sy * S + sx];
      }
    }
  }
  return out;
}

Batch make_batch(std::span<const data::Sample> samples, std::span<const std::size_t> indices,
                 std::span<const Augment> augments) {
  if (indices.empty()) throw ContractError("make_batch: empty batch");
  if (!augments.empty() && augments.size() != indices.size()) {
    throw ContractError("make_batch: one augmentation per sample required");
  }
  const Shape s = samples[indices[0]].rgb.shape();
  const auto B = static_cast<std::int64_t>(indices.size());
  Batch b{Tensor::zeros({B, 3, s.h, s.w}), Tensor::zeros({B, 3, s.h, s.w}), Tensor::zeros({B, 1, s.h, s.w})};
  auto place = [&](const Tensor& src, Tensor& dst, std::int64_t slot, std::size_t k) {
    const Tensor v = augments.empty() ? src : augment(src, augments[k]);
    if (v.shape().h != s.h || v.shape().w != s.w) {
      throw DimensionError("make_batch: sample " + samples[indices[k]].id + " has shape " + v.shape().str());
    }
    std::copy(v.data().begin(), v.data().end(), dst.mutable_data().begin() + slot * v.numel());
  };
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const data::Sample& smp = samples[indices[k]];
    const auto slot = static_cast<std::int64_t>(k);
    place(smp.rgb, b.rgb, slot, k);
    place(smp.thermal, b.thermal, slot, k);
    place(smp.gt, b.gt, slot, k);
  }
  return b;
}

LossValues train_step(const Model& model, Adam& adam, const Batch& batch, double lr) {
  adam.zero_grad();
  Tape tape;
  const ModelOutput out = model.forward(batch.rgb, batch.thermal);
  const LossTerms terms = model.losses(out, batch.gt);
  LossValues v{terms.total.item(), terms.bce.item(), terms.iou.item(), terms.scal.item()};
  if (!std::isfinite(v.total)) {
    throw NumericalError("non-finite loss (bce " + std::to_string(v.bce) + ", iou " + std::to_string(v.iou) +
                         ", scal " + std::to_string(v.scal) + "); " + first_non_finite(tape));
  }
  tape.backward(terms.total);
  for (const auto& [name, p] : adam.params()) {
    if (p.has_grad() && !all_finite(p.grad())) throw NumericalError("non-finite gradient for parameter " + name);
  }
  adam.step(lr);
  return v;
}

std::string log_header() { return "epoch,total,bce,iou,scal,lr\n"; }

std::string log_row(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.6g\n", static_cast<long long>(r.epoch), r.loss.total,
                r.loss.bce, r.loss.iou, r.loss.scal, r.lr);
  return buf;
}

FitResult fit(const Model& model, Adam& adam, std::span<const data::Sample> samples, const TrainConfig& config,
              const Hooks& hooks, std::int64_t start_epoch) {
  config.validate();
  if (samples.empty() && config.epochs > start_epoch) throw ConfigError("training set is empty");
  FitResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(samples.size());
  for (std::int64_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    auto rng = epoch_rng(config.seed, epoch);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
      std::swap(order[i - 1], order[j]);
    }
    const double lr = config.learning_rate_at(epoch);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    std::int64_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> idx(order.data() + at, end - at);
      std::vector<Augment> augs;
      if (config.augment) {
        for (std::size_t k = 0; k < idx.size(); ++k) {
          Augment a;
          a.flip = std::bernoulli_distribution(0.5)(rng);
          a.quarter_turns = std::uniform_int_distribution<int>(0, 3)(rng);
          augs.push_back(a);
        }
      }
      const LossValues v = train_step(model, adam, make_batch(samples, idx, augs), lr);
      rec.loss.total += v.total;
      rec.loss.bce += v.bce;
      rec.loss.iou += v.iou;
      rec.loss.scal += v.scal;
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    rec.loss.total *= inv;
    rec.loss.bce *= inv;
    rec.loss.iou *= inv;
    rec.loss.scal *= inv;
    result.log.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (rec.loss.total < best) {
      best = rec.loss.total;
      result.best_epoch = rec.epoch;
      if (hooks.on_best) hooks.on_best(rec, model, adam);
    }
  }
  return result;
}

Tensor predict(const Model& model, const data::Sample& sample) {
  NoGradGuard no_grad;
  const ModelOutput out = model.forward(sample.rgb, sample.thermal);
  return ops::sigmoid(out.logits).detach();
}

}  // namespace salign::train
