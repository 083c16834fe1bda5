#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace salign {

/// Extents of a rank-4 (batch, channel, height, width) array.
struct Shape {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  std::int64_t numel() const { return n * c * h * w; }
  std::int64_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {
struct TensorImpl;
}

/// Dense row-major rank-4 array of doubles with an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same storage. Values produced by
/// forward operations are treated as immutable; only leaves (parameters, inputs)
/// are written through mutable_data().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t numel() const { return shape().numel(); }

  std::span<const double> data() const;
  std::span<double> mutable_data();

  double at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const;
  double& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w);
  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  bool has_grad() const;
  std::span<const double> grad() const;
  /// Gradient buffer, allocated zero-filled on first access.
  std::span<double> grad_buffer();
  void zero_grad();

  /// Deep copy of the values without autograd history.
  Tensor detach() const;

  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

using BackwardFn = std::function<void(std::span<const double> grad_out)>;

/// One recorded forward operation.
struct TapeNode {
  std::string kind;
  std::vector<Tensor> inputs;
  Tensor output;
  BackwardFn backward;
};

/// Reverse-mode tape for the current thread.
///
/// Constructing a Tape makes it the active recorder for differentiable ops on
/// this thread; destruction restores the previously active tape. Nodes are
/// appended in execution order, so walking them backwards is a valid reverse
/// topological order.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  void record(std::string_view kind, std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn);

  /// Propagates d(loss)/d(.) into every tracked tensor. Single use.
  void backward(const Tensor& loss);

  std::size_t recorded() const { return nodes_.size(); }
  std::size_t visited() const { return visited_; }
  const std::vector<TapeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TapeNode> nodes_;
  std::size_t visited_ = 0;
  bool consumed_ = false;
  Tape* previous_ = nullptr;
};

/// Suspends recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

namespace autograd {

/// True when a tape is active and at least one input needs a gradient.
bool should_record(std::initializer_list<const Tensor*> inputs);

/// Returns the gradient buffer of `t` if it participates in differentiation,
/// else an empty span (callers skip accumulation).
std::span<double> grad_sink(const Tensor& t);

}  // namespace autograd

/// Throws NumericalError naming `what` if any value is NaN/Inf.
void require_finite(const Tensor& t, std::string_view what);
bool all_finite(std::span<const double> values);

}  // namespace salign
