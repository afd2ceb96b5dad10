#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "chor/tensor.hpp"

namespace chor::ad {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Records primitive operations in execution order, which is a topological
/// order of the computation graph. backward() walks it once in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input. Receives an adjoint after backward().
  Var leaf(Tensor value);
  /// Non-differentiable input.
  Var constant(Tensor value);

  /// Used by primitives: append a node whose parents are `parents`.
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Adjoint of a node after backward(); zeros when the node did not
  /// contribute to the loss.
  Tensor grad(Var v) const;

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  /// Adjoint buffer of a parent, allocated as zeros on first touch.
  std::span<double> grad_buffer(std::size_t id);
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Linear algebra and elementwise arithmetic. Binary elementwise ops broadcast
// numpy-style (shapes right-aligned, size-1 or missing dims stretch).
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double value);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double alpha);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
/// Gradient passes only where lo < a < hi.
Var clamp(Var a, double lo, double hi);

// Along the last axis.
Var softmax(Var a);
Var log_softmax(Var a);
/// Reduces the last axis: log(sum(exp(a))) computed with the max shift.
Var logsumexp(Var a);

/// Sum of all elements, rank-0 result.
Var sum(Var a);
Var mean(Var a);
/// Sum over one axis, which is removed from the shape.
Var sum_axis(Var a, std::size_t axis);

Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);

/// mean((a - b)^2) over all elements.
Var mse(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace chor::ad
