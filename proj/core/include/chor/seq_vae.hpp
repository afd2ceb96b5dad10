#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "chor/autodiff.hpp"
#include "chor/data/io.hpp"
#include "chor/data/motion.hpp"
#include "chor/params.hpp"
#include "chor/pose_ae.hpp"
#include "chor/rng.hpp"
#include "chor/training.hpp"

namespace chor {

struct SeqVaeConfig {
  std::size_t seq_len = 128;  // l
  std::vector<std::size_t> encoder_layers{384, 384, 384};
  std::vector<std::size_t> decoder_layers{384, 384, 384};
  std::size_t dense_dim = 256;
  std::size_t latent_dim = 256;
  double kl_weight = 1e-4;
  double mse_scale = 1e4;
};

nlohmann::json to_json(const SeqVaeConfig& config);
SeqVaeConfig seq_vae_config_from_json(const nlohmann::json& doc);

struct LatentGaussian {
  std::vector<double> mean;
  std::vector<double> logvar;
};

/// Variational autoencoder mapping an l-frame sequence to one latent point.
///
/// Encoder: LSTM stack over the frames, last hidden state -> dense(ReLU) ->
/// linear mean and log-variance heads. Decoder: z -> dense(ReLU), repeated as
/// the input at each of l steps of an LSTM stack, then a linear projection of
/// every step's hidden state to a 159-d frame.
class SequenceVae {
 public:
  SequenceVae(SeqVaeConfig config, Rng& rng);

  const SeqVaeConfig& config() const { return config_; }
  std::size_t seq_len() const { return config_.seq_len; }
  std::size_t latent_dim() const { return config_.latent_dim; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  struct Heads {
    ad::Var mean;
    ad::Var logvar;
  };
  /// `steps` holds l tensors of shape B x 159.
  Heads encode(const BoundParams& p, std::span<const ad::Var> steps) const;
  /// Returns the reconstruction stacked step-major: (l * B) x 159, row
  /// s * B + b is frame s of sequence b.
  ad::Var decode(const BoundParams& p, ad::Var z) const;

  LatentGaussian encode(std::span<const data::Frame> seq) const;
  data::Sequence decode(std::span<const double> z) const;
  /// Decodes rows of an (n x latent_dim) block in one pass.
  std::vector<data::Sequence> decode_batch(std::span<const double> latents) const;

  data::NormalizationParams norm;
  double fps = data::kDefaultFps;
  TrainingRecord record;

 private:
  SeqVaeConfig config_;
  ParameterSet params_;
  std::vector<layers::Lstm> encoder_stack_;
  layers::Dense encoder_dense_;
  layers::Dense mean_head_;
  layers::Dense logvar_head_;
  layers::Dense decoder_dense_;
  std::vector<layers::Lstm> decoder_stack_;
  layers::Dense output_;
};

struct VaeLossVars {
  ad::Var total;
  ad::Var mse;
  ad::Var kl;
};

/// total = mse_scale * MSE(x, x_hat) + kl_weight * KL(N(mean, exp(logvar)) || N(0, I)),
/// KL summed over latent axes and averaged over the batch. `noise` (B x d)
/// drives the reparameterised draw z = mean + exp(logvar / 2) * noise; when it
/// is null z = mean.
VaeLossVars vae_loss(const SequenceVae& model, const BoundParams& p, std::span<const ad::Var> steps,
                     const ad::Var* noise);

struct VaeLossValue {
  double total = 0.0;
  double mse = 0.0;
  double kl = 0.0;
};

/// Loss of a batch of l-frame sequences with z = mean (or with `rng` noise).
VaeLossValue vae_loss(const SequenceVae& model, std::span<const data::Sequence> batch, Rng* rng = nullptr);

/// Closed-form KL of diagonal Gaussians against N(0, I), summed over axes.
double gaussian_kl(std::span<const double> mean, std::span<const double> logvar);

/// z = mean + exp(logvar / 2) * N(0, I).
std::vector<double> reparameterize(const LatentGaussian& q, Rng& rng);

struct VaeTrainOptions : TrainOptions {
  VaeTrainOptions() {
    learning_rate = 1e-3;
    batch_size = 32;
  }
  /// Offset between consecutive training sequences (default: l, disjoint).
  std::size_t stride = 0;
  bool rotate_augment = true;
  /// Use z = mean during training (no sampling noise).
  bool deterministic_latent = false;
};

/// Adam on vae_loss over l-frame sequences of the temporal train split, each
/// batch rotated by random headings. Epoch metrics are evaluated with z = mean.
TrainingReport vae_train(SequenceVae& model, const data::MotionDataset& dataset, const VaeTrainOptions& options);

/// decode(radius * N(0, I)).
data::Sequence vae_sample_unconditional(const SequenceVae& model, Rng& rng, double radius = 1.0);

struct VariationRequest {
  data::Sequence base;
  double noise_scale = 0.5;  // k, in latent standard deviations
  std::size_t count = 1;
  std::uint64_t seed = 0;
};

/// decode(mean(base) + k * eps_i) for i < count. The eps draws depend only on
/// the seed, so requests differing only in k perturb along the same directions.
std::vector<data::Sequence> vae_vary(const SequenceVae& model, const VariationRequest& request);

/// decode(mean(seq)).
data::Sequence vae_reconstruct(const SequenceVae& model, std::span<const data::Frame> seq);

/// Mean Euclidean vertex distance between two equally long sequences.
double sequence_deviation(std::span<const data::Frame> a, std::span<const data::Frame> b);

/// Pose-space trajectory of an l-frame sequence (reconstruction or
/// variation) under a pose autoencoder, typically the 2-d one.
data::LatentTrajectory vae_project_to_pose_space(const SequenceVae& vae, const PoseAutoencoder& pose_model,
                                                 std::span<const data::Frame> seq);

}  // namespace chor
