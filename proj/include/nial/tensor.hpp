#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nial/errors.hpp"

namespace nial {

using Index = Eigen::Index;
using Array = Eigen::ArrayXd;            // flat row-major storage
using Shape = std::vector<Index>;

Index numel(const Shape& shape);         // product of dims; 1 for rank 0
std::string shape_str(const Shape& shape);

// Reference-counted payload behind a Tensor handle. `adjoint` is a transient
// buffer owned by the backward replay; user-visible gradients live in `grad`
// (size 0 means "no gradient yet").
struct TensorData {
  Shape shape;
  Array values;
  Array grad;
  Array adjoint;
  bool requires_grad = false;
};

// Dense n-dimensional double tensor. Value-semantic handle: copies share the
// underlying buffer, clone() deep-copies. All layouts are row-major.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor identity(Index n);

  bool defined() const { return static_cast<bool>(d_); }
  const Shape& shape() const { return data_ref().shape; }
  Index rank() const { return static_cast<Index>(shape().size()); }
  Index dim(Index axis) const;
  Index size() const { return data_ref().values.size(); }

  Array& values() { return data_ref().values; }
  const Array& values() const { return data_ref().values; }

  // Scalar extraction; contract error unless the tensor has exactly one element.
  double value() const;

  // Row-major element access for rank 1..4.
  double at(Index i) const;
  double at(Index i, Index j) const;
  double at(Index i, Index j, Index k) const;
  double at(Index i, Index j, Index k, Index l) const;
  Index offset(Index i, Index j) const;
  Index offset(Index i, Index j, Index k) const;

  bool requires_grad() const { return d_ && d_->requires_grad; }
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const { return d_ && d_->grad.size() > 0; }
  const Array& grad() const;
  void zero_grad();

  // Deep copy of values; the clone is a fresh leaf with no grad.
  Tensor clone() const;

  const std::shared_ptr<TensorData>& data() const { return d_; }
  explicit Tensor(std::shared_ptr<TensorData> data) : d_(std::move(data)) {}

 private:
  TensorData& data_ref() const;
  std::shared_ptr<TensorData> d_;
};

// One recorded primitive op: the differentiable inputs, the produced output,
// and a closure that reads output->adjoint and accumulates into the inputs'
// adjoints. Saved intermediates live inside the closure captures.
struct TapeNode {
  std::vector<std::shared_ptr<TensorData>> inputs;
  std::shared_ptr<TensorData> output;
  std::function<void()> backprop;
};

// Execution-ordered record of primitive ops. Constructing a GradTape makes it
// the active recorder for this thread (RAII, nestable); ops record themselves
// while a tape is active and any input requires grad.
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* active();

  void record(TapeNode node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse recorded order,
  // visiting each op exactly once. Gradients accumulate (+=) into the `grad`
  // buffer of every requires_grad tensor that appears on the tape, so calling
  // backward twice without zero_grad doubles them.
  void backward(const Tensor& loss);

 private:
  std::vector<TapeNode> nodes_;
  GradTape* previous_ = nullptr;
};

// Suspends recording for the current thread (validation passes, numeric
// probes inside grad_check).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  GradTape* saved_;
};

}  // namespace nial
