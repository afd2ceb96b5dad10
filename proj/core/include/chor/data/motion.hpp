#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace chor::data {

inline constexpr std::size_t kVertexCount = 53;
inline constexpr std::size_t kFrameDim = kVertexCount * 3;
inline constexpr double kDefaultFps = 35.0;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// One pose: 53 vertices, (x, y, z) each, z vertical. Stored flat as
/// v0x, v0y, v0z, v1x, ...
struct Frame {
  std::array<double, kFrameDim> coords{};

  Vec3 vertex(std::size_t i) const { return {coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]}; }
  void set_vertex(std::size_t i, Vec3 v) {
    coords[3 * i] = v.x;
    coords[3 * i + 1] = v.y;
    coords[3 * i + 2] = v.z;
  }
  /// Mean (x, y) over all vertices.
  std::array<double, 2> centroid_xy() const;

  bool operator==(const Frame&) const = default;
};

using Sequence = std::vector<Frame>;

enum class Centering {
  kGlobal,    // one translation for the whole dataset; locomotion preserved
  kPerFrame,  // every frame's mean (x, y) moved to a common point
};

/// Per-frame canonicalisation removed by remove_orientation(). Inversion maps
/// a canonical frame y back through x = R(heading) * y + centroid.
struct OrientationRemoval {
  std::size_t heading_from = 0;
  std::size_t heading_to = 0;
  std::vector<double> heading;                    // radians in [-pi, pi]
  std::vector<std::array<double, 2>> centroid;    // removed (x, y), normalised units
  std::vector<std::size_t> flagged;               // frames whose heading vertices coincided
};

/// normalised = (raw - per_frame_centroid - offset) * scale, then the optional
/// orientation removal.
struct NormalizationParams {
  Centering centering = Centering::kGlobal;
  std::array<double, 3> offset{0.0, 0.0, 0.0};
  double scale = 1.0;
  std::vector<std::array<double, 2>> per_frame_centroid;  // raw units, kPerFrame only
  std::optional<OrientationRemoval> orientation;
};

struct MotionDataset {
  std::string name;
  double fps = kDefaultFps;
  std::vector<Frame> frames;
  NormalizationParams norm;
};

/// Consecutive prompt/target spans into a source sequence.
struct WindowPair {
  std::span<const Frame> prompt;
  std::span<const Frame> target;
  std::size_t offset = 0;
};

/// Windows at offsets 0, stride, 2*stride, ... each covering m + n frames.
/// Returns an empty list (and logs a warning) when fewer than m + n frames.
std::vector<WindowPair> make_windows(std::span<const Frame> frames, std::size_t m, std::size_t n,
                                     std::size_t stride);

/// Fixed-length sequences of `length` frames (windows with n = 0).
std::vector<std::span<const Frame>> make_sequences(std::span<const Frame> frames, std::size_t length,
                                                   std::size_t stride);

/// Temporal split: the first `train_fraction` of frames train, the rest test.
std::pair<std::span<const Frame>, std::span<const Frame>> temporal_split(std::span<const Frame> frames,
                                                                         double train_fraction = 0.8);

/// Flattens frames into a row-major (frames x 159) buffer.
std::vector<double> flatten(std::span<const Frame> frames);

}  // namespace chor::data
