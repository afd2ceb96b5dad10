#include "chor/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "chor/error.hpp"

namespace chor::mdn {

namespace {

const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

void check_params(const MdnParams& p, std::size_t target_size) {
  if (p.num_mixtures == 0 || p.alpha.size() != p.num_mixtures || p.sigma.size() != p.num_mixtures ||
      p.mu.size() != p.num_mixtures * p.num_components) {
    throw ShapeError("mdn: inconsistent mixture parameters");
  }
  if (target_size != p.num_components) {
    throw ShapeError("mdn: target has " + std::to_string(target_size) + " components, mixture expects " +
                     std::to_string(p.num_components));
  }
}

}  // namespace

MdnParams activate(std::span<const double> raw, std::size_t mixtures, std::size_t components) {
  if (mixtures == 0 || components == 0) throw InvalidArgument("mdn: M and c must be >= 1");
  if (raw.size() != raw_size(mixtures, components)) {
    throw ShapeError("mdn: raw output has length " + std::to_string(raw.size()) + ", expected " +
                     std::to_string(raw_size(mixtures, components)));
  }
  MdnParams p;
  p.num_mixtures = mixtures;
  p.num_components = components;
  const auto logits = raw.first(mixtures);
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) {
    p.alpha.push_back(std::exp(l - peak));
    total += p.alpha.back();
  }
  for (double& a : p.alpha) a /= total;
  const auto means = raw.subspan(mixtures, mixtures * components);
  p.mu.assign(means.begin(), means.end());
  for (double pre : raw.subspan(mixtures + mixtures * components)) {
    p.sigma.push_back(std::clamp(std::exp(pre), kSigmaMin, kSigmaMax));
  }
  return p;
}

double log_density(const MdnParams& params, std::span<const double> target) {
  check_params(params, target.size());
  const auto c = static_cast<double>(params.num_components);
  std::vector<double> terms(params.num_mixtures);
  for (std::size_t i = 0; i < params.num_mixtures; ++i) {
    const auto mu = params.mean(i);
    double sq = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) sq += (target[j] - mu[j]) * (target[j] - mu[j]);
    const double s = params.sigma[i];
    terms[i] = std::log(params.alpha[i]) - 0.5 * c * kLogTwoPi - c * std::log(s) - sq / (2.0 * s * s);
  }
  const double peak = *std::max_element(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += std::exp(t - peak);
  return peak + std::log(total);
}

double density(const MdnParams& params, std::span<const double> target) { return std::exp(log_density(params, target)); }

double nll(std::span<const MdnParams> params, std::span<const std::vector<double>> targets) {
  if (params.size() != targets.size() || params.empty()) {
    throw ShapeError("mdn: need one target per parameter set and a nonempty batch");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) total -= log_density(params[b], targets[b]);
  return total / static_cast<double>(params.size());
}

ad::Var nll(ad::Var raw, ad::Var targets, std::size_t mixtures, std::size_t components) {
  const Shape& rs = raw.shape();
  const Shape& ts = targets.shape();
  if (rs.size() != 2 || rs[1] != raw_size(mixtures, components)) {
    throw ShapeError("mdn: raw output shape " + shape_string(rs) + " does not match M=" + std::to_string(mixtures) +
                     ", c=" + std::to_string(components));
  }
  if (ts.size() != 2 || ts[0] != rs[0] || ts[1] != components) {
    throw ShapeError("mdn: targets " + shape_string(ts) + " do not match raw output " + shape_string(rs));
  }
  const std::size_t batch = rs[0];
  const std::size_t m = mixtures;
  const std::size_t c = components;
  ad::Var logits = ad::slice(raw, 1, 0, m);
  ad::Var mu = ad::reshape(ad::slice(raw, 1, m, m + m * c), Shape{batch, m, c});
  ad::Var log_sigma = ad::clamp(ad::slice(raw, 1, m + m * c, m + m * c + m), std::log(kSigmaMin), std::log(kSigmaMax));

  ad::Var diff = ad::sub(mu, ad::reshape(targets, Shape{batch, 1, c}));
  ad::Var sq = ad::sum_axis(ad::square(diff), 2);
  ad::Var inv_var = ad::exp(ad::scale(log_sigma, -2.0));
  const double dc = static_cast<double>(c);
  ad::Var log_phi = ad::add_scalar(ad::sub(ad::scale(log_sigma, -dc), ad::scale(ad::mul(sq, inv_var), 0.5)),
                                   -0.5 * dc * kLogTwoPi);
  ad::Var log_p = ad::logsumexp(ad::add(ad::log_softmax(logits), log_phi));
  return ad::neg(ad::mean(log_p));
}

std::vector<double> sample(const MdnParams& params, Rng& rng, double temperature) {
  check_params(params, params.num_components);
  if (!(temperature >= 0.0)) throw InvalidArgument("mdn: temperature must be >= 0");
  std::size_t chosen = 0;
  if (temperature == 0.0) {
    chosen = static_cast<std::size_t>(std::max_element(params.alpha.begin(), params.alpha.end()) - params.alpha.begin());
    const auto mu = params.mean(chosen);
    return {mu.begin(), mu.end()};
  }
  std::vector<double> weights(params.num_mixtures);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = std::log(params.alpha[i]) / temperature;
    peak = std::max(peak, weights[i]);
  }
  double total = 0.0;
  for (double& w : weights) total += (w = std::exp(w - peak));
  double u = rng.uniform(0.0, total);
  chosen = weights.size() - 1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) {
      chosen = i;
      break;
    }
    u -= weights[i];
  }
  const auto mu = params.mean(chosen);
  const double spread = temperature * params.sigma[chosen];
  std::vector<double> out(mu.begin(), mu.end());
  for (double& v : out) v += spread * rng.normal();
  return out;
}

}  // namespace chor::mdn
