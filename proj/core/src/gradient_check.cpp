#include "chor/gradient_check.hpp"

#include <algorithm>
#include <cmath>

namespace chor {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const LossBuilder& loss, const std::vector<Tensor>& params) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
  return loss(tape, leaves).value().item();
}

}  // namespace

GradientCheckReport gradient_check(const LossBuilder& loss, std::span<const Tensor> params, double h, double tolerance,
                                   std::span<const std::string> names) {
  std::vector<Tensor> work(params.begin(), params.end());

  std::vector<Tensor> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const Tensor& p : work) leaves.push_back(tape.leaf(p));
    ad::Var l = loss(tape, leaves);
    tape.backward(l);
    for (const ad::Var& v : leaves) analytic.push_back(tape.grad(v));
  }

  GradientCheckReport report;
  for (std::size_t b = 0; b < work.size(); ++b) {
    GradientCheckBlock block;
    block.name = b < names.size() ? names[b] : "param" + std::to_string(b);
    for (std::size_t i = 0; i < work[b].size(); ++i) {
      const double original = work[b][i];
      work[b].mutable_data()[i] = original + h;
      const double up = evaluate(loss, work);
      work[b].mutable_data()[i] = original - h;
      const double down = evaluate(loss, work);
      work[b].mutable_data()[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      block.max_relative_error = std::max(block.max_relative_error, relative_error(analytic[b][i], numeric));
    }
    block.passed = block.max_relative_error < tolerance;
    report.max_relative_error = std::max(report.max_relative_error, block.max_relative_error);
    report.passed = report.passed && block.passed;
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace chor
