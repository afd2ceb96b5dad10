#include "chor/data/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "chor/error.hpp"

namespace chor::data {

namespace {

using Mat3 = std::array<double, 9>;

struct JointDef {
  int parent;
  Vec3 offset;                  // from parent joint, in the parent's frame
  std::array<double, 3> range;  // angular half-range per local axis (rad)
  std::array<double, 3> bias;   // rest angles (rad)
};

// Rest pose faces +y with the figure's left on -x; z up.
constexpr std::array<JointDef, 21> kJoints{{
    {-1, {0.0, 0.0, 0.0}, {0.10, 0.10, 0.20}, {0, 0, 0}},       // 0 pelvis
    {0, {0.0, 0.0, 0.12}, {0.15, 0.10, 0.25}, {0, 0, 0}},       // 1 spine
    {1, {0.0, 0.0, 0.20}, {0.12, 0.10, 0.20}, {0, 0, 0}},       // 2 chest
    {2, {0.0, 0.0, 0.22}, {0.20, 0.20, 0.30}, {0, 0, 0}},       // 3 neck
    {3, {0.0, 0.0, 0.10}, {0.20, 0.20, 0.30}, {0, 0, 0}},       // 4 head
    {2, {-0.18, 0.0, 0.18}, {0.90, 0.60, 0.50}, {0, 0.2, 0}},   // 5 left shoulder
    {5, {0.0, 0.0, -0.28}, {0.70, 0.10, 0.30}, {0.7, 0, 0}},    // 6 left elbow
    {6, {0.0, 0.0, -0.25}, {0.30, 0.30, 0.30}, {0, 0, 0}},      // 7 left wrist
    {7, {0.0, 0.0, -0.08}, {0.00, 0.00, 0.00}, {0, 0, 0}},      // 8 left hand
    {2, {0.18, 0.0, 0.18}, {0.90, 0.60, 0.50}, {0, -0.2, 0}},   // 9 right shoulder
    {9, {0.0, 0.0, -0.28}, {0.70, 0.10, 0.30}, {0.7, 0, 0}},    // 10 right elbow
    {10, {0.0, 0.0, -0.25}, {0.30, 0.30, 0.30}, {0, 0, 0}},     // 11 right wrist
    {11, {0.0, 0.0, -0.08}, {0.00, 0.00, 0.00}, {0, 0, 0}},     // 12 right hand
    {0, {-0.10, 0.0, -0.05}, {0.60, 0.25, 0.20}, {0, 0, 0}},    // 13 left hip
    {13, {0.0, 0.0, -0.42}, {0.50, 0.05, 0.05}, {-0.5, 0, 0}},  // 14 left knee
    {14, {0.0, 0.0, -0.42}, {0.20, 0.10, 0.10}, {0, 0, 0}},     // 15 left ankle
    {15, {0.0, 0.14, -0.05}, {0.00, 0.00, 0.00}, {0, 0, 0}},    // 16 left toe
    {0, {0.10, 0.0, -0.05}, {0.60, 0.25, 0.20}, {0, 0, 0}},     // 17 right hip
    {17, {0.0, 0.0, -0.42}, {0.50, 0.05, 0.05}, {-0.5, 0, 0}},  // 18 right knee
    {18, {0.0, 0.0, -0.42}, {0.20, 0.10, 0.10}, {0, 0, 0}},     // 19 right ankle
    {19, {0.0, 0.14, -0.05}, {0.00, 0.00, 0.00}, {0, 0, 0}},    // 20 right toe
}};

struct MarkerDef {
  int joint;
  Vec3 offset;  // in the joint's frame
};

// Markers 0..20 sit on the joints; these 32 are attached to body segments.
constexpr std::array<MarkerDef, 32> kExtraMarkers{{
    {4, {0.0, 0.08, 0.10}},     {4, {0.0, -0.08, 0.10}},   {4, {-0.07, 0.0, 0.12}},   {4, {0.07, 0.0, 0.12}},
    {2, {0.0, 0.10, 0.10}},     {2, {0.0, -0.10, 0.10}},   {2, {-0.08, 0.05, 0.16}},  {2, {0.08, 0.05, 0.16}},
    {0, {-0.12, 0.08, 0.02}},   {0, {0.12, 0.08, 0.02}},   {0, {-0.08, -0.10, 0.05}}, {0, {0.08, -0.10, 0.05}},
    {5, {-0.05, 0.0, -0.12}},   {5, {0.0, 0.04, -0.18}},   {6, {-0.04, 0.0, -0.10}},  {6, {0.0, 0.03, -0.15}},
    {9, {0.05, 0.0, -0.12}},    {9, {0.0, 0.04, -0.18}},   {10, {0.04, 0.0, -0.10}},  {10, {0.0, 0.03, -0.15}},
    {13, {-0.07, 0.0, -0.20}},  {13, {0.0, 0.07, -0.25}},  {14, {-0.05, 0.0, -0.20}}, {14, {0.0, 0.06, -0.15}},
    {17, {0.07, 0.0, -0.20}},   {17, {0.0, 0.07, -0.25}},  {18, {0.05, 0.0, -0.20}},  {18, {0.0, 0.06, -0.15}},
    {15, {0.0, -0.05, -0.05}},  {19, {0.0, -0.05, -0.05}}, {8, {0.0, 0.02, -0.07}},   {12, {0.0, 0.02, -0.07}},
}};

static_assert(kJoints.size() + kExtraMarkers.size() == kVertexCount);

constexpr double kPelvisHeight = 0.95;

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k)
      for (int col = 0; col < 3; ++col) c[3 * r + col] += a[3 * r + k] * b[3 * k + col];
  return c;
}

Vec3 transform_point(const Mat3& m, const Vec3& v) {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Mat3 rot_x(double a) { return {1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a)}; }
Mat3 rot_y(double a) { return {std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a)}; }
Mat3 rot_z(double a) { return {std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1}; }

// Sum of sinusoids with frequencies below the configured bandwidth, scaled to
// peak magnitude <= 1.
struct BandLimited {
  std::vector<double> freq;
  std::vector<double> phase;
  std::vector<double> weight;

  static BandLimited draw(std::size_t harmonics, double bandwidth, Rng& rng) {
    BandLimited b;
    double total = 0.0;
    for (std::size_t h = 0; h < harmonics; ++h) {
      b.freq.push_back(rng.uniform(0.15, std::max(0.16, bandwidth)));
      b.phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
      b.weight.push_back(rng.uniform(0.5, 1.0));
      total += b.weight.back();
    }
    for (double& w : b.weight) w /= total;
    return b;
  }

  double value(double t) const {
    double v = 0.0;
    for (std::size_t h = 0; h < freq.size(); ++h) v += weight[h] * std::sin(2.0 * std::numbers::pi * freq[h] * t + phase[h]);
    return v;
  }

  // Antiderivative divided by 2*pi (so its derivative is value(t) / (2*pi)).
  double integral(double t) const {
    double v = 0.0;
    for (std::size_t h = 0; h < freq.size(); ++h) {
      v -= weight[h] * std::cos(2.0 * std::numbers::pi * freq[h] * t + phase[h]) / (4.0 * std::numbers::pi * std::numbers::pi * freq[h]);
    }
    return v;
  }
};

struct Motion {
  std::vector<std::array<BandLimited, 3>> joint_angles;
  BandLimited turn;
  BandLimited travel_x;
  BandLimited travel_y;
  BandLimited bob;
  double initial_heading = 0.0;
  double amplitude = 1.0;
  double turn_rate = 0.0;
  double travel_speed = 0.0;

  Frame pose(double t) const {
    const double heading = initial_heading + turn_rate * 2.0 * std::numbers::pi * turn.integral(t);
    const Vec3 root{travel_speed * 2.0 * std::numbers::pi * travel_x.integral(t),
                    travel_speed * 2.0 * std::numbers::pi * travel_y.integral(t), kPelvisHeight + 0.03 * bob.value(t)};

    std::array<Mat3, kJoints.size()> world{};
    std::array<Vec3, kJoints.size()> position{};
    for (std::size_t j = 0; j < kJoints.size(); ++j) {
      const JointDef& def = kJoints[j];
      std::array<double, 3> angle{};
      for (int a = 0; a < 3; ++a) angle[a] = def.bias[a] + amplitude * def.range[a] * joint_angles[j][a].value(t);
      const Mat3 local = multiply(rot_z(angle[2]), multiply(rot_y(angle[1]), rot_x(angle[0])));
      if (def.parent < 0) {
        world[j] = multiply(rot_z(heading), local);
        position[j] = root;
      } else {
        const auto p = static_cast<std::size_t>(def.parent);
        world[j] = multiply(world[p], local);
        const Vec3 d = transform_point(world[p], def.offset);
        position[j] = {position[p].x + d.x, position[p].y + d.y, position[p].z + d.z};
      }
    }

    Frame f;
    for (std::size_t j = 0; j < kJoints.size(); ++j) f.set_vertex(j, position[j]);
    for (std::size_t m = 0; m < kExtraMarkers.size(); ++m) {
      const auto j = static_cast<std::size_t>(kExtraMarkers[m].joint);
      const Vec3 d = transform_point(world[j], kExtraMarkers[m].offset);
      f.set_vertex(kJoints.size() + m, {position[j].x + d.x, position[j].y + d.y, position[j].z + d.z});
    }
    return f;
  }
};

double max_step(const std::vector<Frame>& frames) {
  double worst = 0.0;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    for (std::size_t v = 0; v < kVertexCount; ++v) {
      const Vec3 a = frames[k - 1].vertex(v);
      const Vec3 b = frames[k].vertex(v);
      worst = std::max(worst, std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z)));
    }
  }
  return worst;
}

}  // namespace

MotionDataset synth_generate(const SynthConfig& config, Rng& rng) {
  if (!(config.fps > 0.0)) throw InvalidArgument("synth: fps must be positive");
  if (!(config.max_velocity > 0.0)) throw InvalidArgument("synth: max_velocity must be positive");
  if (config.harmonics == 0) throw InvalidArgument("synth: harmonics must be >= 1");

  Motion motion;
  motion.amplitude = config.amplitude;
  motion.turn_rate = config.turn_rate;
  motion.travel_speed = config.travel_speed;
  for (std::size_t j = 0; j < kJoints.size(); ++j) {
    std::array<BandLimited, 3> axes;
    for (auto& axis : axes) axis = BandLimited::draw(config.harmonics, config.bandwidth, rng);
    motion.joint_angles.push_back(std::move(axes));
  }
  motion.turn = BandLimited::draw(config.harmonics, config.bandwidth, rng);
  motion.travel_x = BandLimited::draw(config.harmonics, config.bandwidth, rng);
  motion.travel_y = BandLimited::draw(config.harmonics, config.bandwidth, rng);
  motion.bob = BandLimited::draw(config.harmonics, config.bandwidth, rng);
  motion.initial_heading = rng.uniform(-std::numbers::pi, std::numbers::pi);

  // Slow the clock until no vertex moves faster than the bound.
  double time_scale = 1.0;
  std::vector<Frame> frames;
  for (int attempt = 0; attempt < 64; ++attempt) {
    frames.clear();
    frames.reserve(config.frames);
    for (std::size_t k = 0; k < config.frames; ++k) {
      frames.push_back(motion.pose(time_scale * static_cast<double>(k) / config.fps));
    }
    const double step = max_step(frames);
    if (step <= config.max_velocity) break;
    time_scale *= 0.95 * config.max_velocity / step;
  }

  MotionDataset ds;
  ds.name = config.name;
  ds.fps = config.fps;
  ds.frames = std::move(frames);
  return ds;
}

std::vector<std::pair<std::size_t, std::size_t>> synth_rigid_pairs() {
  std::vector<std::vector<std::size_t>> groups(kJoints.size());
  for (std::size_t j = 0; j < kJoints.size(); ++j) {
    groups[j].push_back(j);
    if (kJoints[j].parent >= 0) groups[static_cast<std::size_t>(kJoints[j].parent)].push_back(j);
  }
  for (std::size_t m = 0; m < kExtraMarkers.size(); ++m) {
    groups[static_cast<std::size_t>(kExtraMarkers[m].joint)].push_back(kJoints.size() + m);
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& g : groups) {
    for (std::size_t a = 0; a < g.size(); ++a)
      for (std::size_t b = a + 1; b < g.size(); ++b) pairs.emplace_back(g[a], g[b]);
  }
  return pairs;
}

std::vector<std::pair<std::size_t, std::size_t>> synth_skeleton_edges() {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t j = 0; j < kJoints.size(); ++j) {
    if (kJoints[j].parent >= 0) edges.emplace_back(static_cast<std::size_t>(kJoints[j].parent), j);
  }
  for (std::size_t m = 0; m < kExtraMarkers.size(); ++m) {
    edges.emplace_back(static_cast<std::size_t>(kExtraMarkers[m].joint), kJoints.size() + m);
  }
  return edges;
}

}  // namespace chor::data
