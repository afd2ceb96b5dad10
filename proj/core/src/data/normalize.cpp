#include "chor/data/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "chor/error.hpp"

namespace chor::data {

namespace {

constexpr double kCoincident = 1e-12;

double wrap_angle(double theta) {
  theta = std::remainder(theta, 2.0 * std::numbers::pi);
  return theta;
}

}  // namespace

Frame rotate_frame(const Frame& frame, double theta, double cx, double cy) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Frame out = frame;
  for (std::size_t v = 0; v < kVertexCount; ++v) {
    const double x = frame.coords[3 * v] - cx;
    const double y = frame.coords[3 * v + 1] - cy;
    out.coords[3 * v] = cx + c * x - s * y;
    out.coords[3 * v + 1] = cy + s * x + c * y;
  }
  return out;
}

Frame translate_frame(const Frame& frame, double dx, double dy) {
  Frame out = frame;
  for (std::size_t v = 0; v < kVertexCount; ++v) {
    out.coords[3 * v] += dx;
    out.coords[3 * v + 1] += dy;
  }
  return out;
}

MotionDataset center_and_scale(const MotionDataset& raw, Centering centering) {
  if (raw.frames.empty()) throw InvalidArgument("center_and_scale: dataset '" + raw.name + "' is empty");
  if (!(raw.fps > 0.0)) throw InvalidArgument("center_and_scale: fps must be positive");

  MotionDataset out = raw;
  out.norm = NormalizationParams{};
  out.norm.centering = centering;
  if (centering == Centering::kPerFrame) {
    out.norm.per_frame_centroid.reserve(raw.frames.size());
    for (Frame& f : out.frames) {
      const auto c = f.centroid_xy();
      out.norm.per_frame_centroid.push_back(c);
      f = translate_frame(f, -c[0], -c[1]);
    }
  }

  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const Frame& f : out.frames) {
    for (std::size_t i = 0; i < kFrameDim; ++i) {
      lo[i % 3] = std::min(lo[i % 3], f.coords[i]);
      hi[i % 3] = std::max(hi[i % 3], f.coords[i]);
    }
  }
  double extent = 0.0;
  for (std::size_t a = 0; a < 3; ++a) extent = std::max(extent, hi[a] - lo[a]);
  if (!std::isfinite(extent)) throw InvalidArgument("center_and_scale: non-finite coordinates");
  if (extent <= 0.0) throw InvalidArgument("center_and_scale: degenerate dataset (all points identical)");

  const double scale = 1.0 / extent;
  const std::array<double, 3> offset{0.5 * (lo[0] + hi[0]) - 0.5 * extent, 0.5 * (lo[1] + hi[1]) - 0.5 * extent,
                                     lo[2]};
  for (Frame& f : out.frames) {
    for (std::size_t i = 0; i < kFrameDim; ++i) {
      f.coords[i] = std::clamp((f.coords[i] - offset[i % 3]) * scale, 0.0, 1.0);
    }
  }
  out.norm.offset = offset;
  out.norm.scale = scale;
  return out;
}

MotionDataset denormalize(const MotionDataset& normalized) {
  MotionDataset out = normalized.norm.orientation ? restore_orientation(normalized) : normalized;
  const auto& norm = normalized.norm;
  if (!(norm.scale > 0.0)) throw InvalidArgument("denormalize: scale must be positive");
  if (norm.centering == Centering::kPerFrame && norm.per_frame_centroid.size() != out.frames.size()) {
    throw InvalidArgument("denormalize: per-frame centroids do not match frame count");
  }
  for (std::size_t k = 0; k < out.frames.size(); ++k) {
    Frame& f = out.frames[k];
    for (std::size_t i = 0; i < kFrameDim; ++i) f.coords[i] = f.coords[i] / norm.scale + norm.offset[i % 3];
    if (norm.centering == Centering::kPerFrame) {
      f = translate_frame(f, norm.per_frame_centroid[k][0], norm.per_frame_centroid[k][1]);
    }
  }
  out.norm = NormalizationParams{};
  return out;
}

std::vector<Frame> apply_normalization(const NormalizationParams& norm, std::span<const Frame> raw) {
  if (!(norm.scale > 0.0)) throw InvalidArgument("apply_normalization: scale must be positive");
  std::vector<Frame> out;
  out.reserve(raw.size());
  for (const Frame& r : raw) {
    Frame f = r;
    if (norm.centering == Centering::kPerFrame) {
      const auto c = f.centroid_xy();
      f = translate_frame(f, -c[0], -c[1]);
    }
    for (std::size_t i = 0; i < kFrameDim; ++i) f.coords[i] = (f.coords[i] - norm.offset[i % 3]) * norm.scale;
    out.push_back(f);
  }
  return out;
}

std::vector<Frame> invert_normalization(const NormalizationParams& norm, std::span<const Frame> normalized) {
  if (!(norm.scale > 0.0)) throw InvalidArgument("invert_normalization: scale must be positive");
  std::vector<Frame> out(normalized.begin(), normalized.end());
  for (Frame& f : out) {
    for (std::size_t i = 0; i < kFrameDim; ++i) f.coords[i] = f.coords[i] / norm.scale + norm.offset[i % 3];
  }
  return out;
}

namespace {

struct Canonical {
  Frame frame;
  double heading = 0.0;
  std::array<double, 2> centroid{};
  bool coincident = false;
};

Canonical canonicalize(const Frame& frame, std::pair<std::size_t, std::size_t> pair, double fallback) {
  Canonical out;
  out.centroid = frame.centroid_xy();
  const Vec3 a = frame.vertex(pair.first);
  const Vec3 b = frame.vertex(pair.second);
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  if (std::hypot(dx, dy) < kCoincident) {
    out.coincident = true;
    out.heading = fallback;
  } else {
    out.heading = std::atan2(dy, dx);
  }
  Frame centred = translate_frame(frame, -out.centroid[0], -out.centroid[1]);
  out.frame = rotate_frame(centred, -out.heading, 0.0, 0.0);
  return out;
}

void check_pair(std::pair<std::size_t, std::size_t> pair) {
  if (pair.first >= kVertexCount || pair.second >= kVertexCount || pair.first == pair.second) {
    throw InvalidArgument("heading vertices must be two distinct indices below 53");
  }
}

}  // namespace

Frame canonicalize_frame(const Frame& frame, std::pair<std::size_t, std::size_t> pair) {
  check_pair(pair);
  return canonicalize(frame, pair, 0.0).frame;
}

MotionDataset remove_orientation(const MotionDataset& ds, std::pair<std::size_t, std::size_t> pair) {
  check_pair(pair);
  MotionDataset out = ds;
  OrientationRemoval removal;
  removal.heading_from = pair.first;
  removal.heading_to = pair.second;
  removal.heading.reserve(ds.frames.size());
  removal.centroid.reserve(ds.frames.size());
  double previous = 0.0;
  for (std::size_t k = 0; k < ds.frames.size(); ++k) {
    Canonical c = canonicalize(ds.frames[k], pair, previous);
    if (c.coincident) removal.flagged.push_back(k);
    previous = c.heading;
    out.frames[k] = c.frame;
    removal.heading.push_back(c.heading);
    removal.centroid.push_back(c.centroid);
  }

  if (ds.norm.orientation) {
    // x = R1 (R2 y + c2) + c1  =>  heading = t1 + t2, centroid = R1 c2 + c1
    const OrientationRemoval& prior = *ds.norm.orientation;
    if (prior.heading.size() != ds.frames.size()) {
      throw InvalidArgument("remove_orientation: stored orientation does not match frame count");
    }
    for (std::size_t k = 0; k < ds.frames.size(); ++k) {
      const double t1 = prior.heading[k];
      const auto c2 = removal.centroid[k];
      removal.centroid[k] = {prior.centroid[k][0] + std::cos(t1) * c2[0] - std::sin(t1) * c2[1],
                             prior.centroid[k][1] + std::sin(t1) * c2[0] + std::cos(t1) * c2[1]};
      removal.heading[k] = wrap_angle(t1 + removal.heading[k]);
    }
    removal.heading_from = prior.heading_from;
    removal.heading_to = prior.heading_to;
    removal.flagged.insert(removal.flagged.begin(), prior.flagged.begin(), prior.flagged.end());
    std::sort(removal.flagged.begin(), removal.flagged.end());
    removal.flagged.erase(std::unique(removal.flagged.begin(), removal.flagged.end()), removal.flagged.end());
  }
  out.norm.orientation = std::move(removal);
  return out;
}

MotionDataset restore_orientation(const MotionDataset& ds) {
  MotionDataset out = ds;
  if (!ds.norm.orientation) return out;
  const OrientationRemoval& removal = *ds.norm.orientation;
  if (removal.heading.size() != ds.frames.size() || removal.centroid.size() != ds.frames.size()) {
    throw InvalidArgument("restore_orientation: stored orientation does not match frame count");
  }
  for (std::size_t k = 0; k < ds.frames.size(); ++k) {
    Frame f = rotate_frame(ds.frames[k], removal.heading[k], 0.0, 0.0);
    out.frames[k] = translate_frame(f, removal.centroid[k][0], removal.centroid[k][1]);
  }
  out.norm.orientation.reset();
  return out;
}

}  // namespace chor::data
