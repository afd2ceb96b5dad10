#pragma once

#include <span>
#include <vector>

#include "chor/data/motion.hpp"
#include "chor/rng.hpp"

namespace chor::data {

/// Rotates `seq` rigidly about the vertical axis through its mean (x, y).
Sequence rotate_sequence(std::span<const Frame> seq, double theta);

struct RotatedBatch {
  std::vector<Sequence> sequences;
  std::vector<double> angles;  // one per sequence, uniform in [0, 2*pi)
};

RotatedBatch rotate_augment(std::span<const Sequence> batch, Rng& rng);

struct OffsetBatch {
  std::vector<Frame> frames;
  std::vector<std::array<double, 2>> offsets;  // uniform in [0, 1] on x and y
};

OffsetBatch offset_augment(std::span<const Frame> batch, Rng& rng);

}  // namespace chor::data
