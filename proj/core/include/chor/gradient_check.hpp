#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chor/autodiff.hpp"

namespace chor {

/// Builds a scalar loss on `tape` from leaves bound to the parameter blocks.
using LossBuilder = std::function<ad::Var(ad::Tape& tape, std::span<const ad::Var> params)>;

struct GradientCheckBlock {
  std::string name;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct GradientCheckReport {
  std::vector<GradientCheckBlock> blocks;
  double max_relative_error = 0.0;
  bool passed = true;
};

/// Relative error of one entry: |a - n| / max(|a|, |n|, floor). The floor
/// keeps entries whose true derivative is ~0 from amplifying round-off.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compares reverse-mode gradients to central differences with step `h`.
GradientCheckReport gradient_check(const LossBuilder& loss, std::span<const Tensor> params, double h = 1e-5,
                                   double tolerance = 1e-4, std::span<const std::string> names = {});

}  // namespace chor
