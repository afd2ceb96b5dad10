#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chor/autodiff.hpp"
#include "chor/rng.hpp"
#include "chor/tensor.hpp"

namespace chor {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Ordered, named collection of trainable tensors.
class ParameterSet {
 public:
  /// Appends a tensor and returns its index.
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& operator[](std::size_t i) const { return values_[i]; }
  Tensor& operator[](std::size_t i) { return values_[i]; }
  std::size_t index_of(const std::string& name) const;

  std::span<Tensor> values() { return values_; }
  std::span<const Tensor> values() const { return values_; }
  const std::vector<std::string>& names() const { return names_; }

  std::size_t element_count() const;
  std::vector<NamedTensor> named() const;
  /// Replaces every value from `tensors`, which must match names and shapes.
  void assign(const std::vector<NamedTensor>& tensors);

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Parameters placed on a tape, as leaves (training) or constants (inference).
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const ParameterSet& params, bool trainable);
  /// Wraps vars already on a tape, in ParameterSet order.
  explicit BoundParams(std::span<const ad::Var> vars) : vars_(vars.begin(), vars.end()) {}
  ad::Var operator[](std::size_t i) const { return vars_[i]; }
  std::span<const ad::Var> vars() const { return vars_; }

 private:
  std::vector<ad::Var> vars_;
};

/// Gradients of every bound parameter after tape.backward().
std::vector<Tensor> collect_grads(const ad::Tape& tape, const BoundParams& bound);

/// Glorot/Xavier uniform initialisation.
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

namespace layers {

struct Dense {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;
};

/// Weight (in x out), bias (out).
Dense add_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
ad::Var dense(const BoundParams& p, const Dense& layer, ad::Var x);

/// Fused gate weights of shape (in + hidden) x 4*hidden, gate order
/// input, forget, candidate, output. Forget-gate bias starts at 1.
struct Lstm {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t hidden = 0;
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

Lstm add_lstm(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng);
LstmState lstm_zero_state(ad::Tape& tape, std::size_t batch, std::size_t hidden);
LstmState lstm_step(const BoundParams& p, const Lstm& layer, ad::Var x, const LstmState& prev);

/// Runs a stack of LSTM layers over `inputs` (one B x in tensor per step)
/// from a zero state; returns the top layer's hidden output at every step.
std::vector<ad::Var> lstm_stack(ad::Tape& tape, const BoundParams& p, std::span<const Lstm> stack,
                                std::span<const ad::Var> inputs);

}  // namespace layers

}  // namespace chor
