#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "chor/autodiff.hpp"
#include "chor/rng.hpp"

namespace chor::mdn {

inline constexpr double kSigmaMin = 1e-4;
inline constexpr double kSigmaMax = 1e4;

/// Gaussian mixture over c-dimensional targets with one isotropic spread per
/// component:
///   p(t) = sum_i alpha_i * (2 pi)^(-c/2) sigma_i^(-c) exp(-|t - mu_i|^2 / (2 sigma_i^2))
struct MdnParams {
  std::size_t num_mixtures = 0;    // M
  std::size_t num_components = 0;  // c
  std::vector<double> alpha;       // M, positive, sums to 1
  std::vector<double> mu;          // M x c
  std::vector<double> sigma;       // M, in [kSigmaMin, kSigmaMax]

  std::span<const double> mean(std::size_t i) const { return {mu.data() + i * num_components, num_components}; }
};

/// Length of the raw head output: M weight logits, M*c means, M spread
/// pre-activations, in that order.
constexpr std::size_t raw_size(std::size_t mixtures, std::size_t components) {
  return mixtures + mixtures * components + mixtures;
}

/// alpha = softmax(logits), mu = identity, sigma = clamp(exp(pre)).
MdnParams activate(std::span<const double> raw, std::size_t mixtures, std::size_t components);

double log_density(const MdnParams& params, std::span<const double> target);
double density(const MdnParams& params, std::span<const double> target);

/// Mean of -log p(t | params) over the batch.
double nll(std::span<const MdnParams> params, std::span<const std::vector<double>> targets);

/// Differentiable mean NLL from raw head outputs (B x raw_size) and targets
/// (B x c), evaluated in log space.
ad::Var nll(ad::Var raw, ad::Var targets, std::size_t mixtures, std::size_t components);

/// Draws a component from alpha sharpened by the temperature (argmax at 0),
/// then mu_i + temperature * sigma_i * N(0, I). Temperature 0 consumes no
/// random numbers.
std::vector<double> sample(const MdnParams& params, Rng& rng, double temperature = 1.0);

}  // namespace chor::mdn
