#include "chor/adam.hpp"

#include <cmath>
#include <string>

#include "chor/error.hpp"

namespace chor {

AdamState AdamState::for_parameter(const Tensor& param) {
  return AdamState{0, Tensor(param.shape(), 0.0), Tensor(param.shape(), 0.0)};
}

namespace {

void validate(const Tensor& param, const Tensor& grad, const AdamState& state) {
  if (grad.shape() != param.shape() || state.first_moment.shape() != param.shape() ||
      state.second_moment.shape() != param.shape()) {
    throw ShapeError("adam: parameter " + shape_string(param.shape()) + ", gradient " + shape_string(grad.shape()) +
                     " and moments " + shape_string(state.first_moment.shape()) + " must agree");
  }
  if (!grad.all_finite()) throw NumericError("adam: non-finite gradient, update rejected");
}

void apply(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& config) {
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  auto p = param.mutable_data();
  auto m = state.first_moment.mutable_data();
  auto v = state.second_moment.mutable_data();
  auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

}  // namespace

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& config) {
  validate(param, grad, state);
  apply(param, grad, state, config);
}

void Adam::step(std::span<Tensor> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam: " + std::to_string(params.size()) + " parameters but " + std::to_string(grads.size()) +
                     " gradients");
  }
  if (states_.empty()) {
    for (const Tensor& p : params) states_.push_back(AdamState::for_parameter(p));
  }
  if (states_.size() != params.size()) throw ShapeError("adam: parameter count changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) validate(params[i], grads[i], states_[i]);
  for (std::size_t i = 0; i < params.size(); ++i) apply(params[i], grads[i], states_[i], config_);
}

}  // namespace chor
