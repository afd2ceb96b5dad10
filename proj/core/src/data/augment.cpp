#include "chor/data/augment.hpp"

#include <numbers>

#include "chor/data/normalize.hpp"
#include "chor/error.hpp"

namespace chor::data {

Sequence rotate_sequence(std::span<const Frame> seq, double theta) {
  double cx = 0.0;
  double cy = 0.0;
  for (const Frame& f : seq) {
    const auto c = f.centroid_xy();
    cx += c[0];
    cy += c[1];
  }
  if (!seq.empty()) {
    cx /= static_cast<double>(seq.size());
    cy /= static_cast<double>(seq.size());
  }
  Sequence out;
  out.reserve(seq.size());
  for (const Frame& f : seq) out.push_back(rotate_frame(f, theta, cx, cy));
  return out;
}

RotatedBatch rotate_augment(std::span<const Sequence> batch, Rng& rng) {
  if (batch.empty()) throw InvalidArgument("rotate_augment: empty batch");
  RotatedBatch out;
  out.sequences.reserve(batch.size());
  out.angles.reserve(batch.size());
  for (const Sequence& seq : batch) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    out.angles.push_back(theta);
    out.sequences.push_back(rotate_sequence(seq, theta));
  }
  return out;
}

OffsetBatch offset_augment(std::span<const Frame> batch, Rng& rng) {
  if (batch.empty()) throw InvalidArgument("offset_augment: empty batch");
  OffsetBatch out;
  out.frames.reserve(batch.size());
  out.offsets.reserve(batch.size());
  for (const Frame& f : batch) {
    const double dx = rng.uniform(0.0, 1.0);
    const double dy = rng.uniform(0.0, 1.0);
    out.offsets.push_back({dx, dy});
    out.frames.push_back(translate_frame(f, dx, dy));
  }
  return out;
}

}  // namespace chor::data
