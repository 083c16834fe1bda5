#include "salign/tensor.hpp"

#include <cmath>
#include <sstream>

#include "salign/errors.hpp"

namespace salign {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
  return os.str();
}

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
};
}  // namespace detail

namespace {

thread_local Tape* g_active_tape = nullptr;

void check_shape(const Shape& s) {
  if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
    throw DimensionError("negative extent in shape " + s.str());
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape) { return full(shape, 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  check_shape(shape);
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape;
  impl->data.assign(static_cast<std::size_t>(shape.numel()), value);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  check_shape(shape);
  if (static_cast<std::int64_t>(values.size()) != shape.numel()) {
    throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " + shape.str());
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return full({1, 1, 1, 1}, value); }

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of undefined tensor");
  return impl_->shape;
}

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
  const Shape& s = impl_->shape;
  return impl_->data[static_cast<std::size_t>(((n * s.c + c) * s.h + h) * s.w + w)];
}

double& Tensor::at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
  const Shape& s = impl_->shape;
  return impl_->data[static_cast<std::size_t>(((n * s.c + c) * s.h + h) * s.w + w)];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape().str());
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::grad_buffer() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  return Tensor(std::move(impl));
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::current() { return g_active_tape; }

void Tape::record(std::string_view kind, std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn) {
  if (consumed_) throw ContractError("recording on a tape that has already run backward");
  nodes_.push_back(TapeNode{std::string(kind), std::move(inputs), output, std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw ContractError("backward called twice on the same tape; re-run the forward pass");
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + (loss.defined() ? loss.shape().str() : "undefined"));
  }
  if (nodes_.empty()) throw ContractError("backward on an empty tape");
  consumed_ = true;

  Tensor seed = loss;
  seed.grad_buffer()[0] += 1.0;

  // Reverse recording order is a reverse topological order.
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    ++visited_;
    if (!it->output.has_grad()) continue;
    it->backward(it->output.grad());
  }
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }
NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

namespace autograd {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

std::span<double> grad_sink(const Tensor& t) {
  if (!t.defined() || !t.requires_grad()) return {};
  Tensor handle = t;  // shares storage
  return handle.grad_buffer();
}

}  // namespace autograd

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor& t, std::string_view what) {
  if (!all_finite(t.data())) {
    throw NumericalError("non-finite value in " + std::string(what) + " of shape " + t.shape().str());
  }
}

}  // namespace salign
