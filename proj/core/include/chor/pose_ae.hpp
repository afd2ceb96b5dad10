#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chor/autodiff.hpp"
#include "chor/data/io.hpp"
#include "chor/data/motion.hpp"
#include "chor/data/normalize.hpp"
#include "chor/params.hpp"
#include "chor/rng.hpp"
#include "chor/training.hpp"

namespace chor {

struct PoseAeConfig {
  std::size_t latent_dim = 32;
  std::size_t hidden = 64;
  std::size_t hidden_layers = 2;
  double leaky_alpha = 0.2;
  /// Canonicalise heading and position of every frame before encoding.
  bool remove_orientation = false;
  std::pair<std::size_t, std::size_t> heading_pair = data::kDefaultHeadingPair;
};

nlohmann::json to_json(const PoseAeConfig& config);
PoseAeConfig pose_ae_config_from_json(const nlohmann::json& doc);

/// Per-pose autoencoder: 159 -> [hidden, LeakyReLU] x layers -> d (linear),
/// mirrored decoder back to 159 with a linear output.
class PoseAutoencoder {
 public:
  PoseAutoencoder(PoseAeConfig config, Rng& rng);

  const PoseAeConfig& config() const { return config_; }
  std::size_t latent_dim() const { return config_.latent_dim; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  ad::Var encode(const BoundParams& p, ad::Var frames) const;
  ad::Var decode(const BoundParams& p, ad::Var latents) const;

  std::vector<double> encode(const data::Frame& frame) const;
  data::Frame decode(std::span<const double> z) const;
  /// Row-major (n x d) latents for n frames.
  std::vector<double> encode_batch(std::span<const data::Frame> frames) const;
  std::vector<data::Frame> decode_batch(std::span<const double> latents) const;

  /// Canonicalised when the model was trained with orientation removal.
  data::Frame prepare(const data::Frame& frame) const;

  data::NormalizationParams norm;
  double fps = data::kDefaultFps;
  TrainingRecord record;

 private:
  PoseAeConfig config_;
  ParameterSet params_;
  std::vector<layers::Dense> encoder_;
  std::vector<layers::Dense> decoder_;
};

/// Minimises reconstruction MSE with Adam on the first train_fraction of the
/// frames; epoch 0 in the report is the untrained model.
TrainingReport ae_train(PoseAutoencoder& model, const data::MotionDataset& dataset, const TrainOptions& options,
                        bool offset_augment = false);

/// decode(encode(prepare(frame))) for every frame.
std::vector<data::Frame> ae_reconstruct(const PoseAutoencoder& model, std::span<const data::Frame> frames);

/// Mean squared coordinate error of ae_reconstruct over `frames`.
double ae_mse(const PoseAutoencoder& model, std::span<const data::Frame> frames);

enum class Interpolation { kLinear, kCatmullRom };

/// Interpolates the control points with `samples_per_segment` steps per
/// segment and decodes every point: (points - 1) * samples_per_segment + 1
/// frames. Throws InvalidArgument for an empty trajectory.
std::vector<data::Frame> ae_decode_trajectory(const PoseAutoencoder& model, const data::LatentTrajectory& traj,
                                              Interpolation interpolation, std::size_t samples_per_segment);

/// Latent points visited by ae_decode_trajectory.
std::vector<std::vector<double>> interpolate_trajectory(const data::LatentTrajectory& traj,
                                                        Interpolation interpolation,
                                                        std::size_t samples_per_segment);

struct SinusoidOptions {
  double amplitude = 0.1;
  double frequency = 1.0;  // Hz
  double fps = data::kDefaultFps;
  /// Latent axes to perturb; all when empty.
  std::vector<std::size_t> axes;
  /// Per-axis phases; drawn uniformly from [0, 2*pi) when empty.
  std::vector<double> phases;
};

struct SinusoidVariation {
  std::vector<data::Frame> frames;
  std::vector<std::vector<double>> base_latents;
  std::vector<std::vector<double>> latents;
  std::vector<double> phases;
};

/// z'_t = z_t + a * sin(2 pi f t / fps + phi_j) on each perturbed axis j.
SinusoidVariation ae_sinusoidal_variation(const PoseAutoencoder& model, std::span<const data::Frame> seq,
                                          const SinusoidOptions& options, Rng& rng);

/// Encodes every (prepared) frame.
data::LatentTrajectory ae_project(const PoseAutoencoder& model, std::span<const data::Frame> seq);

}  // namespace chor
