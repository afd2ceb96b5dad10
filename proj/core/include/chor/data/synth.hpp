#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "chor/data/motion.hpp"
#include "chor/rng.hpp"

namespace chor::data {

/// Parameters of the synthetic dancer. Lengths in metres, time in seconds.
struct SynthConfig {
  std::size_t frames = 1000;
  double fps = kDefaultFps;
  /// Upper bound on any vertex displacement between consecutive frames.
  double max_velocity = 0.05;
  /// Highest frequency (Hz) present in the joint-angle trajectories.
  double bandwidth = 1.2;
  std::size_t harmonics = 3;
  /// Scales every joint's angular range.
  double amplitude = 1.0;
  /// Peak turning rate of the whole figure (rad/s).
  double turn_rate = 0.8;
  /// Mean travel speed of the root (m/s).
  double travel_speed = 0.3;
  std::string name = "synthetic";
};

/// Articulated 53-marker figure driven by band-limited joint-angle
/// trajectories. Deterministic for a given rng state.
MotionDataset synth_generate(const SynthConfig& config, Rng& rng);

/// Marker pairs that sit on one rigid body segment; their distance is constant.
std::vector<std::pair<std::size_t, std::size_t>> synth_rigid_pairs();

/// Edge list for drawing the synthetic skeleton as a stick figure.
std::vector<std::pair<std::size_t, std::size_t>> synth_skeleton_edges();

}  // namespace chor::data
