#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "chor/data/motion.hpp"

namespace chor::data {

/// Default heading vertices of the synthetic skeleton: left hip -> right hip.
inline constexpr std::pair<std::size_t, std::size_t> kDefaultHeadingPair{13, 17};

/// Centers (x, y) and applies one isotropic scale plus translation so that
/// every coordinate lies in [0, 1]: the widest axis spans exactly [0, 1],
/// x and y ranges are centred on 0.5 and the lowest z sits at 0.
/// Throws InvalidArgument for an empty or degenerate (zero extent) dataset.
MotionDataset center_and_scale(const MotionDataset& raw, Centering centering = Centering::kGlobal);

/// Inverse of center_and_scale (and of remove_orientation when recorded).
MotionDataset denormalize(const MotionDataset& normalized);

/// Maps raw frames into the space described by `norm` (no clamping). With
/// per-frame centering each frame's own (x, y) centroid is subtracted first.
std::vector<Frame> apply_normalization(const NormalizationParams& norm, std::span<const Frame> raw);

/// Inverse scale and offset of `norm`. Per-frame centroids are not restored.
std::vector<Frame> invert_normalization(const NormalizationParams& norm, std::span<const Frame> normalized);

/// Canonicalises each frame: subtracts its (x, y) centroid, then rotates about
/// the vertical axis so the horizontal heading vector from vertex `pair.first`
/// to `pair.second` points along +x. Frames whose heading vertices coincide
/// horizontally reuse the previous frame's heading and are listed in
/// `norm.orientation->flagged`. Reapplying composes with the stored removal.
MotionDataset remove_orientation(const MotionDataset& ds,
                                 std::pair<std::size_t, std::size_t> pair = kDefaultHeadingPair);

/// Undoes remove_orientation using the stored headings and centroids.
MotionDataset restore_orientation(const MotionDataset& ds);

/// Canonical form of a single frame, ignoring any dataset bookkeeping.
Frame canonicalize_frame(const Frame& frame, std::pair<std::size_t, std::size_t> pair = kDefaultHeadingPair);

/// Rotation by `theta` about the vertical axis through (cx, cy).
Frame rotate_frame(const Frame& frame, double theta, double cx, double cy);
Frame translate_frame(const Frame& frame, double dx, double dy);

}  // namespace chor::data
