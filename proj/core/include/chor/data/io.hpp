#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "chor/data/motion.hpp"
#include "chor/error.hpp"

namespace chor::data {

/// A document does not follow the expected schema.
class FormatError : public Error {
 public:
  using Error::Error;
};

struct Animation {
  double fps = kDefaultFps;
  std::vector<Frame> frames;
  std::string name;
};

/// {version: 1, fps, vertex_count: 53, frames: [[[x, y, z] x 53] ...]}
nlohmann::json animation_to_json(std::span<const Frame> frames, double fps, const std::string& name = {});
Animation animation_from_json(const nlohmann::json& doc);

void export_animation(const std::filesystem::path& path, std::span<const Frame> frames, double fps,
                      const std::string& name = {});
Animation import_animation(const std::filesystem::path& path);

/// One row per frame, 159 comma-separated values v0x, v0y, v0z, ..., v52z. A
/// non-numeric first line is treated as a header.
std::vector<Frame> frames_from_csv(const std::string& text);
std::string frames_to_csv(std::span<const Frame> frames);

/// Loads a dataset from a .csv file or an animation document.
MotionDataset load_dataset(const std::filesystem::path& path, std::optional<double> fps = std::nullopt);

/// {version: 1, latent_dim, points: [[...]]}
struct LatentTrajectory {
  std::size_t latent_dim = 0;
  std::vector<std::vector<double>> points;
  double fps = kDefaultFps;
};

nlohmann::json trajectory_to_json(const LatentTrajectory& traj);
LatentTrajectory trajectory_from_json(const nlohmann::json& doc);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace chor::data
