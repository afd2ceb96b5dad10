#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chor/tensor.hpp"

namespace chor {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::int64_t step_count = 0;
  Tensor first_moment;
  Tensor second_moment;

  static AdamState for_parameter(const Tensor& param);
};

/// One bias-corrected Adam update of `param` in place. Throws NumericError
/// without touching `param` or `state` when `grad` has a NaN/Inf entry, and
/// ShapeError when the shapes disagree.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& config);

/// Adam over an ordered list of parameter tensors.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  const std::vector<AdamState>& states() const { return states_; }

  /// All gradients are validated before any parameter moves, so a rejected
  /// step leaves every parameter and moment untouched.
  void step(std::span<Tensor> params, std::span<const Tensor> grads);

 private:
  AdamConfig config_;
  std::vector<AdamState> states_;
};

}  // namespace chor
