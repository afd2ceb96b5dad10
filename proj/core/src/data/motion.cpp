#include "chor/data/motion.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "chor/error.hpp"

namespace chor::data {

std::array<double, 2> Frame::centroid_xy() const {
  double x = 0.0;
  double y = 0.0;
  for (std::size_t v = 0; v < kVertexCount; ++v) {
    x += coords[3 * v];
    y += coords[3 * v + 1];
  }
  return {x / kVertexCount, y / kVertexCount};
}

std::vector<WindowPair> make_windows(std::span<const Frame> frames, std::size_t m, std::size_t n,
                                     std::size_t stride) {
  if (m == 0 || n == 0) throw InvalidArgument("make_windows: m and n must be >= 1");
  if (stride == 0) throw InvalidArgument("make_windows: stride must be >= 1");
  std::vector<WindowPair> windows;
  if (frames.size() < m + n) {
    spdlog::warn("make_windows: {} frames is shorter than m + n = {}; no windows", frames.size(), m + n);
    return windows;
  }
  const std::size_t count = (frames.size() - m - n) / stride + 1;
  windows.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t offset = k * stride;
    windows.push_back({frames.subspan(offset, m), frames.subspan(offset + m, n), offset});
  }
  return windows;
}

std::vector<std::span<const Frame>> make_sequences(std::span<const Frame> frames, std::size_t length,
                                                   std::size_t stride) {
  if (length == 0 || stride == 0) throw InvalidArgument("make_sequences: length and stride must be >= 1");
  std::vector<std::span<const Frame>> out;
  if (frames.size() < length) {
    spdlog::warn("make_sequences: {} frames is shorter than sequence length {}", frames.size(), length);
    return out;
  }
  for (std::size_t offset = 0; offset + length <= frames.size(); offset += stride) {
    out.push_back(frames.subspan(offset, length));
  }
  return out;
}

std::pair<std::span<const Frame>, std::span<const Frame>> temporal_split(std::span<const Frame> frames,
                                                                         double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw InvalidArgument("temporal_split: train fraction must lie in [0, 1]");
  }
  const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(frames.size())));
  return {frames.first(cut), frames.subspan(cut)};
}

std::vector<double> flatten(std::span<const Frame> frames) {
  std::vector<double> out;
  out.reserve(frames.size() * kFrameDim);
  for (const Frame& f : frames) out.insert(out.end(), f.coords.begin(), f.coords.end());
  return out;
}

}  // namespace chor::data
