#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace chor {

/// Seeded pseudo-random generator. One root per run; components take
/// independent streams through split() so that adding draws in one component
/// does not shift another's sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  /// Independent child stream keyed by a stable tag.
  Rng split(std::string_view tag) const;
  Rng split(std::uint64_t index) const;

  double uniform(double lo = 0.0, double hi = 1.0);
  double normal(double mean = 0.0, double stddev = 1.0);
  std::size_t index(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace chor
