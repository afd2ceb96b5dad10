#include "chor/params.hpp"

#include <cmath>

#include "chor/error.hpp"

namespace chor {

std::size_t ParameterSet::add(std::string name, Tensor value) {
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw InvalidArgument("no parameter named '" + name + "'");
}

std::size_t ParameterSet::element_count() const {
  std::size_t total = 0;
  for (const Tensor& t : values_) total += t.size();
  return total;
}

std::vector<NamedTensor> ParameterSet::named() const {
  std::vector<NamedTensor> out;
  out.reserve(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) out.push_back({names_[i], values_[i]});
  return out;
}

void ParameterSet::assign(const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != values_.size()) {
    throw ShapeError("expected " + std::to_string(values_.size()) + " parameter tensors, got " +
                     std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != names_[i]) {
      throw ShapeError("parameter " + std::to_string(i) + " is '" + names_[i] + "', got '" + tensors[i].name + "'");
    }
    if (tensors[i].value.shape() != values_[i].shape()) {
      throw ShapeError("parameter '" + names_[i] + "' has shape " + shape_string(values_[i].shape()) + ", got " +
                       shape_string(tensors[i].value.shape()));
    }
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) values_[i] = tensors[i].value;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  return names_ == other.names_ && values_ == other.values_;
}

BoundParams::BoundParams(ad::Tape& tape, const ParameterSet& params, bool trainable) {
  vars_.reserve(params.size());
  for (const Tensor& t : params.values()) vars_.push_back(trainable ? tape.leaf(t) : tape.constant(t));
}

std::vector<Tensor> collect_grads(const ad::Tape& tape, const BoundParams& bound) {
  std::vector<Tensor> grads;
  grads.reserve(bound.vars().size());
  for (const ad::Var& v : bound.vars()) grads.push_back(tape.grad(v));
  return grads;
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(fan_in * fan_out);
  for (double& v : values) v = rng.uniform(-limit, limit);
  return Tensor::matrix(fan_in, fan_out, std::move(values));
}

namespace layers {

Dense add_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  Dense layer;
  layer.in = in;
  layer.out = out;
  layer.weight = params.add(prefix + ".weight", glorot_uniform(in, out, rng));
  layer.bias = params.add(prefix + ".bias", Tensor(Shape{out}, 0.0));
  return layer;
}

ad::Var dense(const BoundParams& p, const Dense& layer, ad::Var x) {
  return ad::add(ad::matmul(x, p[layer.weight]), p[layer.bias]);
}

Lstm add_lstm(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng) {
  Lstm layer;
  layer.in = in;
  layer.hidden = hidden;
  layer.weight = params.add(prefix + ".weight", glorot_uniform(in + hidden, 4 * hidden, rng));
  std::vector<double> bias(4 * hidden, 0.0);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;
  layer.bias = params.add(prefix + ".bias", Tensor::vector(std::move(bias)));
  return layer;
}

LstmState lstm_zero_state(ad::Tape& tape, std::size_t batch, std::size_t hidden) {
  ad::Var zero = tape.constant(Tensor(Shape{batch, hidden}, 0.0));
  return {zero, zero};
}

LstmState lstm_step(const BoundParams& p, const Lstm& layer, ad::Var x, const LstmState& prev) {
  const std::size_t h = layer.hidden;
  const ad::Var joined[] = {x, prev.h};
  ad::Var gates = ad::add(ad::matmul(ad::concat(joined, 1), p[layer.weight]), p[layer.bias]);
  ad::Var input = ad::sigmoid(ad::slice(gates, 1, 0, h));
  ad::Var forget = ad::sigmoid(ad::slice(gates, 1, h, 2 * h));
  ad::Var candidate = ad::tanh(ad::slice(gates, 1, 2 * h, 3 * h));
  ad::Var output = ad::sigmoid(ad::slice(gates, 1, 3 * h, 4 * h));
  ad::Var c = ad::add(ad::mul(forget, prev.c), ad::mul(input, candidate));
  ad::Var hidden = ad::mul(output, ad::tanh(c));
  return {hidden, c};
}

std::vector<ad::Var> lstm_stack(ad::Tape& tape, const BoundParams& p, std::span<const Lstm> stack,
                                std::span<const ad::Var> inputs) {
  if (inputs.empty()) throw InvalidArgument("lstm_stack: no input steps");
  const std::size_t batch = inputs.front().shape().at(0);
  std::vector<ad::Var> sequence(inputs.begin(), inputs.end());
  for (const Lstm& layer : stack) {
    LstmState state = lstm_zero_state(tape, batch, layer.hidden);
    for (ad::Var& step : sequence) {
      state = lstm_step(p, layer, step, state);
      step = state.h;
    }
  }
  return sequence;
}

}  // namespace layers

}  // namespace chor
