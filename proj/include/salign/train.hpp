#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "salign/checkpoint.hpp"
#include "salign/config.hpp"
#include "salign/dataset.hpp"
#include "salign/network.hpp"

namespace salign::train {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over a fixed parameter list. Reads each
/// parameter's gradient buffer; a parameter without one is treated as having
/// zero gradient.
class Adam {
 public:
  Adam(ParamList params, AdamOptions options);

  void step(double lr);
  void zero_grad();

  std::int64_t steps() const { return steps_; }
  const ParamList& params() const { return params_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }
  /// Replaces the step count and moment values (shapes must match).
  void restore(std::int64_t steps, std::span<const Tensor> m, std::span<const Tensor> v);

 private:
  ParamList params_;
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t steps_ = 0;
};

AdamOptions adam_options(const TrainConfig& config);

/// Parameters under "param/<name>", Adam moments under "adam.m/<name>" and
/// "adam.v/<name>"; meta carries the model configuration, epoch and step.
ckpt::Checkpoint make_checkpoint(const Model& model, const Adam* adam, std::int64_t epoch);
/// Builds a model from the checkpoint's stored configuration and loads its parameters.
Model model_from_checkpoint(const ckpt::Checkpoint& checkpoint);
/// Copies "param/..." values into `model`. Throws DimensionError on shape mismatch.
void load_parameters(const Model& model, const ckpt::Checkpoint& checkpoint);
void load_optimizer(Adam& adam, const ckpt::Checkpoint& checkpoint);

struct Batch {
  Tensor rgb;      // (B, 3, S, S)
  Tensor thermal;  // (B, 3, S, S)
  Tensor gt;       // (B, 1, S, S)
};

/// Geometric augmentation shared by a pair and its mask.
struct Augment {
  bool flip = false;  // horizontal mirror, applied first
  int quarter_turns = 0;
};

/// Applies `aug` to every (n, c) plane of a square tensor.
Tensor augment(const Tensor& t, Augment aug);

Batch make_batch(std::span<const data::Sample> samples, std::span<const std::size_t> indices,
                 std::span<const Augment> augments = {});

struct LossValues {
  double total = 0.0;
  double bce = 0.0;
  double iou = 0.0;
  double scal = 0.0;
};

/// One optimization step: forward, backward, Adam update. Throws NumericalError
/// naming the first operation that produced a non-finite value.
LossValues train_step(const Model& model, Adam& adam, const Batch& batch, double lr);

struct EpochRecord {
  std::int64_t epoch = 0;
  LossValues loss;  // mean over the epoch's batches
  double lr = 0.0;
};

std::string log_header();
std::string log_row(const EpochRecord& record);

struct Hooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Called when an epoch sets a new lowest mean total loss.
  std::function<void(const EpochRecord&, const Model&, const Adam&)> on_best;
};

struct FitResult {
  std::vector<EpochRecord> log;
  std::int64_t best_epoch = -1;
};

/// Runs `config.epochs` epochs of shuffled mini-batches from `start_epoch`.
FitResult fit(const Model& model, Adam& adam, std::span<const data::Sample> samples, const TrainConfig& config,
              const Hooks& hooks = {}, std::int64_t start_epoch = 0);

/// Sigmoid saliency map (1, 1, S, S) for one sample, without gradient tracking.
Tensor predict(const Model& model, const data::Sample& sample);

}  // namespace salign::train
