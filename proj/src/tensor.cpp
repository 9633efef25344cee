#include "nial/tensor.hpp"

#include <sstream>
#include <unordered_set>
#include <utility>

namespace nial {

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

namespace {

std::shared_ptr<TensorData> make_data(Shape shape, bool requires_grad) {
  for (Index d : shape) {
    if (d <= 0) {
      throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
    }
  }
  auto d = std::make_shared<TensorData>();
  d->values = Array::Zero(numel(shape));
  d->shape = std::move(shape);
  d->requires_grad = requires_grad;
  return d;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_data(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto d = make_data(std::move(shape), requires_grad);
  d->values.setConstant(value);
  return Tensor(std::move(d));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  auto d = make_data(std::move(shape), requires_grad);
  if (static_cast<Index>(values.size()) != d->values.size()) {
    throw DimensionError("from_values: " + shape_str(d->shape) + " needs " +
                         std::to_string(d->values.size()) + " values, got " +
                         std::to_string(values.size()));
  }
  for (Index i = 0; i < d->values.size(); ++i) d->values[i] = values[static_cast<std::size_t>(i)];
  return Tensor(std::move(d));
}

Tensor Tensor::scalar(double value) {
  auto d = make_data({1}, false);
  d->values[0] = value;
  return Tensor(std::move(d));
}

Tensor Tensor::identity(Index n) {
  auto d = make_data({n, n}, false);
  for (Index i = 0; i < n; ++i) d->values[i * n + i] = 1.0;
  return Tensor(std::move(d));
}

TensorData& Tensor::data_ref() const {
  if (!d_) throw ContractError("operation on an empty (default-constructed) tensor");
  return *d_;
}

Index Tensor::dim(Index axis) const {
  const Shape& s = shape();
  if (axis < 0 || axis >= static_cast<Index>(s.size())) {
    throw ContractError("dim(" + std::to_string(axis) + ") out of range for " + shape_str(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

double Tensor::value() const {
  if (size() != 1) {
    throw ContractError("value(): tensor " + shape_str(shape()) + " is not a scalar");
  }
  return values()[0];
}

double Tensor::at(Index i) const { return values()[i]; }
double Tensor::at(Index i, Index j) const { return values()[offset(i, j)]; }
double Tensor::at(Index i, Index j, Index k) const { return values()[offset(i, j, k)]; }
double Tensor::at(Index i, Index j, Index k, Index l) const {
  const Shape& s = shape();
  return values()[((i * s[1] + j) * s[2] + k) * s[3] + l];
}
Index Tensor::offset(Index i, Index j) const { return i * shape()[1] + j; }
Index Tensor::offset(Index i, Index j, Index k) const {
  const Shape& s = shape();
  return (i * s[1] + j) * s[2] + k;
}

Tensor& Tensor::set_requires_grad(bool flag) {
  data_ref().requires_grad = flag;
  return *this;
}

const Array& Tensor::grad() const {
  if (!has_grad()) {
    throw ContractError("grad(): no gradient stored for tensor " + shape_str(shape()));
  }
  return d_->grad;
}

void Tensor::zero_grad() {
  TensorData& d = data_ref();
  if (d.grad.size() > 0) d.grad.setZero();
}

Tensor Tensor::clone() const {
  const TensorData& src = data_ref();
  auto d = std::make_shared<TensorData>();
  d->shape = src.shape;
  d->values = src.values;
  d->requires_grad = src.requires_grad;
  return Tensor(std::move(d));
}

// ---------------------------------------------------------------------------
// GradTape
// ---------------------------------------------------------------------------

namespace {
thread_local GradTape* g_active_tape = nullptr;
}

GradTape::GradTape() : previous_(g_active_tape) { g_active_tape = this; }

GradTape::~GradTape() { g_active_tape = previous_; }

GradTape* GradTape::active() { return g_active_tape; }

void GradTape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar tensor" +
                        (loss.defined() ? ", got " + shape_str(loss.shape()) : std::string()));
  }
  const std::shared_ptr<TensorData>& target = loss.data();
  bool on_tape = false;
  for (const TapeNode& node : nodes_) {
    if (node.output == target) {
      on_tape = true;
      break;
    }
  }
  if (!on_tape) {
    throw ContractError("backward: loss was not produced by ops recorded on this tape");
  }

  // Fresh adjoints for everything the tape touches, then seed the loss.
  for (TapeNode& node : nodes_) {
    for (auto& in : node.inputs) in->adjoint = Array::Zero(in->values.size());
    node.output->adjoint = Array::Zero(node.output->values.size());
  }
  target->adjoint[0] = 1.0;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->backprop();
  }

  // Fold transient adjoints into persistent grads, once per distinct tensor.
  std::unordered_set<TensorData*> seen;
  auto sweep = [&seen](const std::shared_ptr<TensorData>& t) {
    if (!t->requires_grad || !seen.insert(t.get()).second) return;
    if (t->grad.size() == 0) t->grad = Array::Zero(t->values.size());
    t->grad += t->adjoint;
  };
  for (TapeNode& node : nodes_) {
    for (auto& in : node.inputs) sweep(in);
    sweep(node.output);
  }
}

NoGradGuard::NoGradGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_active_tape = saved_; }

}  // namespace nial
