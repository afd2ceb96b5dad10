#include "chor/pose_ae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "chor/adam.hpp"
#include "chor/data/augment.hpp"
#include "chor/error.hpp"

namespace chor {

using data::Frame;
using data::kFrameDim;

nlohmann::json to_json(const PoseAeConfig& config) {
  return {{"latent_dim", config.latent_dim},
          {"hidden", config.hidden},
          {"hidden_layers", config.hidden_layers},
          {"leaky_alpha", config.leaky_alpha},
          {"remove_orientation", config.remove_orientation},
          {"heading_pair", {config.heading_pair.first, config.heading_pair.second}}};
}

PoseAeConfig pose_ae_config_from_json(const nlohmann::json& doc) {
  PoseAeConfig config;
  if (doc.contains("latent_dim")) config.latent_dim = doc["latent_dim"].get<std::size_t>();
  if (doc.contains("hidden")) config.hidden = doc["hidden"].get<std::size_t>();
  if (doc.contains("hidden_layers")) config.hidden_layers = doc["hidden_layers"].get<std::size_t>();
  if (doc.contains("leaky_alpha")) config.leaky_alpha = doc["leaky_alpha"].get<double>();
  if (doc.contains("remove_orientation")) config.remove_orientation = doc["remove_orientation"].get<bool>();
  if (doc.contains("heading_pair")) {
    const auto& pair = doc["heading_pair"];
    config.heading_pair = {pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>()};
  }
  return config;
}

PoseAutoencoder::PoseAutoencoder(PoseAeConfig config, Rng& rng) : config_(config) {
  if (config_.latent_dim == 0 || config_.latent_dim >= kFrameDim) {
    throw InvalidArgument("pose autoencoder: latent_dim must lie in [1, 159)");
  }
  if (config_.hidden == 0 || config_.hidden_layers == 0) {
    throw InvalidArgument("pose autoencoder: needs at least one hidden layer of positive width");
  }
  std::size_t in = kFrameDim;
  for (std::size_t l = 0; l < config_.hidden_layers; ++l) {
    encoder_.push_back(layers::add_dense(params_, "encoder." + std::to_string(l), in, config_.hidden, rng));
    in = config_.hidden;
  }
  encoder_.push_back(layers::add_dense(params_, "encoder.latent", in, config_.latent_dim, rng));
  in = config_.latent_dim;
  for (std::size_t l = 0; l < config_.hidden_layers; ++l) {
    decoder_.push_back(layers::add_dense(params_, "decoder." + std::to_string(l), in, config_.hidden, rng));
    in = config_.hidden;
  }
  decoder_.push_back(layers::add_dense(params_, "decoder.output", in, kFrameDim, rng));
}

ad::Var PoseAutoencoder::encode(const BoundParams& p, ad::Var frames) const {
  ad::Var h = frames;
  for (std::size_t l = 0; l + 1 < encoder_.size(); ++l) {
    h = ad::leaky_relu(layers::dense(p, encoder_[l], h), config_.leaky_alpha);
  }
  return layers::dense(p, encoder_.back(), h);
}

ad::Var PoseAutoencoder::decode(const BoundParams& p, ad::Var latents) const {
  ad::Var h = latents;
  for (std::size_t l = 0; l + 1 < decoder_.size(); ++l) {
    h = ad::leaky_relu(layers::dense(p, decoder_[l], h), config_.leaky_alpha);
  }
  return layers::dense(p, decoder_.back(), h);
}

std::vector<double> PoseAutoencoder::encode_batch(std::span<const Frame> frames) const {
  if (frames.empty()) return {};
  ad::Tape tape;
  BoundParams p(tape, params_, false);
  ad::Var x = tape.constant(Tensor(Shape{frames.size(), kFrameDim}, data::flatten(frames)));
  return encode(p, x).value().to_vector();
}

std::vector<Frame> PoseAutoencoder::decode_batch(std::span<const double> latents) const {
  const std::size_t d = config_.latent_dim;
  if (latents.size() % d != 0) {
    throw ShapeError("pose decode: latent block of " + std::to_string(latents.size()) +
                     " values is not a multiple of latent_dim " + std::to_string(d));
  }
  const std::size_t n = latents.size() / d;
  if (n == 0) return {};
  ad::Tape tape;
  BoundParams p(tape, params_, false);
  ad::Var z = tape.constant(Tensor(Shape{n, d}, std::vector<double>(latents.begin(), latents.end())));
  const Tensor out = decode(p, z).value();
  std::vector<Frame> frames(n);
  auto values = out.data();
  for (std::size_t k = 0; k < n; ++k) std::copy_n(values.data() + k * kFrameDim, kFrameDim, frames[k].coords.begin());
  return frames;
}

std::vector<double> PoseAutoencoder::encode(const Frame& frame) const { return encode_batch(std::span(&frame, 1)); }

Frame PoseAutoencoder::decode(std::span<const double> z) const {
  if (z.size() != config_.latent_dim) {
    throw ShapeError("pose decode: expected latent of dimension " + std::to_string(config_.latent_dim) + ", got " +
                     std::to_string(z.size()));
  }
  return decode_batch(z).front();
}

Frame PoseAutoencoder::prepare(const Frame& frame) const {
  return config_.remove_orientation ? data::canonicalize_frame(frame, config_.heading_pair) : frame;
}

std::vector<Frame> ae_reconstruct(const PoseAutoencoder& model, std::span<const Frame> frames) {
  std::vector<Frame> prepared;
  prepared.reserve(frames.size());
  for (const Frame& f : frames) prepared.push_back(model.prepare(f));
  return model.decode_batch(model.encode_batch(prepared));
}

namespace {

constexpr std::size_t kEvalChunk = 512;

// Frames are already prepared.
double reconstruction_mse(const PoseAutoencoder& model, std::span<const Frame> frames) {
  if (frames.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t start = 0; start < frames.size(); start += kEvalChunk) {
    const auto chunk = frames.subspan(start, std::min(kEvalChunk, frames.size() - start));
    const auto recon = model.decode_batch(model.encode_batch(chunk));
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      for (std::size_t i = 0; i < kFrameDim; ++i) {
        const double d = recon[k].coords[i] - chunk[k].coords[i];
        total += d * d;
      }
    }
  }
  return total / static_cast<double>(frames.size() * kFrameDim);
}

}  // namespace

double ae_mse(const PoseAutoencoder& model, std::span<const Frame> frames) {
  std::vector<Frame> prepared;
  prepared.reserve(frames.size());
  for (const Frame& f : frames) prepared.push_back(model.prepare(f));
  return reconstruction_mse(model, prepared);
}

TrainingReport ae_train(PoseAutoencoder& model, const data::MotionDataset& dataset, const TrainOptions& options,
                        bool offset_augment) {
  if (options.batch_size == 0) throw InvalidArgument("ae_train: batch size must be >= 1");
  std::vector<Frame> frames;
  frames.reserve(dataset.frames.size());
  for (const Frame& f : dataset.frames) frames.push_back(model.prepare(f));
  const auto [train, test] = data::temporal_split(frames, options.train_fraction);
  if (train.empty()) throw InvalidArgument("ae_train: training split is empty");

  model.norm = dataset.norm;
  model.norm.per_frame_centroid.clear();
  model.norm.orientation.reset();
  model.fps = dataset.fps;

  TrainingReport report;
  auto evaluate = [&](std::size_t epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = reconstruction_mse(model, train);
    m.test_loss = reconstruction_mse(model, test);
    m.terms["train_mse"] = m.train_loss;
    m.terms["test_mse"] = m.test_loss;
    return m;
  };
  report.epochs.push_back(evaluate(0));

  Adam adam(AdamConfig{.learning_rate = options.learning_rate});
  Rng root(options.seed);
  ParameterSet last_good = model.parameters();

  for (std::size_t epoch = 1; epoch <= options.epochs && !report.aborted; ++epoch) {
    const auto order = shuffled_indices(train.size(), options.seed, epoch);
    Rng offset_rng = root.split("offset").split(epoch);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, order.size() - start);
      std::vector<Frame> batch;
      batch.reserve(count);
      for (std::size_t k = 0; k < count; ++k) batch.push_back(train[order[start + k]]);
      if (offset_augment) batch = data::offset_augment(batch, offset_rng).frames;

      ad::Tape tape;
      BoundParams p(tape, model.parameters(), true);
      ad::Var x = tape.constant(Tensor(Shape{count, kFrameDim}, data::flatten(batch)));
      ad::Var loss = ad::mse(model.decode(p, model.encode(p, x)), x);
      if (!std::isfinite(loss.value().item())) {
        report.aborted = true;
        report.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(report.steps);
        break;
      }
      tape.backward(loss);
      try {
        adam.step(model.parameters().values(), collect_grads(tape, p));
      } catch (const NumericError& e) {
        report.aborted = true;
        report.abort_reason = e.what();
        break;
      }
      ++report.steps;
    }
    if (report.aborted) break;
    EpochMetrics metrics = evaluate(epoch);
    if (!std::isfinite(metrics.train_loss)) {
      report.aborted = true;
      report.abort_reason = "non-finite training loss after epoch " + std::to_string(epoch);
      break;
    }
    report.epochs.push_back(std::move(metrics));
    last_good = model.parameters();
    model.record.epoch = epoch;
    if (options.on_epoch_end) options.on_epoch_end(epoch);
  }
  if (report.aborted) model.parameters() = last_good;

  model.record.seed = options.seed;
  model.record.config = to_json(options);
  model.record.config["offset_augment"] = offset_augment;
  const EpochMetrics& last = report.final();
  model.record.metrics = {{"train_mse", last.train_loss}};
  if (std::isfinite(last.test_loss)) model.record.metrics["test_mse"] = last.test_loss;
  return report;
}

std::vector<std::vector<double>> interpolate_trajectory(const data::LatentTrajectory& traj,
                                                        Interpolation interpolation,
                                                        std::size_t samples_per_segment) {
  if (traj.points.empty()) throw InvalidArgument("trajectory has no points");
  if (samples_per_segment == 0) throw InvalidArgument("samples_per_segment must be >= 1");
  const std::size_t d = traj.latent_dim;
  for (const auto& p : traj.points) {
    if (p.size() != d) {
      throw ShapeError("trajectory point has dimension " + std::to_string(p.size()) + ", expected " + std::to_string(d));
    }
  }
  const auto& pts = traj.points;
  const std::size_t n = pts.size();
  std::vector<std::vector<double>> out;
  out.reserve((n - 1) * samples_per_segment + 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto& p0 = pts[i == 0 ? 0 : i - 1];
    const auto& p1 = pts[i];
    const auto& p2 = pts[i + 1];
    const auto& p3 = pts[std::min(i + 2, n - 1)];
    for (std::size_t s = 0; s < samples_per_segment; ++s) {
      const double u = static_cast<double>(s) / static_cast<double>(samples_per_segment);
      std::vector<double> z(d);
      for (std::size_t j = 0; j < d; ++j) {
        if (interpolation == Interpolation::kLinear) {
          z[j] = p1[j] + u * (p2[j] - p1[j]);
        } else {
          z[j] = 0.5 * (2.0 * p1[j] + (p2[j] - p0[j]) * u + (2.0 * p0[j] - 5.0 * p1[j] + 4.0 * p2[j] - p3[j]) * u * u +
                        (-p0[j] + 3.0 * p1[j] - 3.0 * p2[j] + p3[j]) * u * u * u);
        }
      }
      out.push_back(std::move(z));
    }
  }
  out.push_back(pts.back());
  return out;
}

std::vector<Frame> ae_decode_trajectory(const PoseAutoencoder& model, const data::LatentTrajectory& traj,
                                        Interpolation interpolation, std::size_t samples_per_segment) {
  if (traj.latent_dim != model.latent_dim()) {
    throw ShapeError("trajectory latent_dim " + std::to_string(traj.latent_dim) + " does not match model latent_dim " +
                     std::to_string(model.latent_dim()));
  }
  const auto points = interpolate_trajectory(traj, interpolation, samples_per_segment);
  std::vector<double> flat;
  flat.reserve(points.size() * model.latent_dim());
  for (const auto& p : points) flat.insert(flat.end(), p.begin(), p.end());
  return model.decode_batch(flat);
}

SinusoidVariation ae_sinusoidal_variation(const PoseAutoencoder& model, std::span<const Frame> seq,
                                          const SinusoidOptions& options, Rng& rng) {
  if (!(options.amplitude >= 0.0)) throw InvalidArgument("sinusoidal variation: amplitude must be >= 0");
  if (!(options.frequency > 0.0)) throw InvalidArgument("sinusoidal variation: frequency must be > 0");
  if (!(options.fps > 0.0)) throw InvalidArgument("sinusoidal variation: fps must be > 0");
  const std::size_t d = model.latent_dim();
  std::vector<std::size_t> axes = options.axes;
  if (axes.empty()) {
    for (std::size_t j = 0; j < d; ++j) axes.push_back(j);
  }
  for (std::size_t j : axes) {
    if (j >= d) throw InvalidArgument("sinusoidal variation: axis " + std::to_string(j) + " out of range");
  }
  SinusoidVariation out;
  out.phases = options.phases;
  if (out.phases.empty()) {
    for (std::size_t k = 0; k < axes.size(); ++k) out.phases.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  } else if (out.phases.size() != axes.size()) {
    throw InvalidArgument("sinusoidal variation: need one phase per perturbed axis");
  }

  std::vector<Frame> prepared;
  for (const Frame& f : seq) prepared.push_back(model.prepare(f));
  const auto latents = model.encode_batch(prepared);
  std::vector<double> perturbed = latents;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const double angle = 2.0 * std::numbers::pi * options.frequency * static_cast<double>(t) / options.fps;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      perturbed[t * d + axes[k]] += options.amplitude * std::sin(angle + out.phases[k]);
    }
    out.base_latents.emplace_back(latents.begin() + static_cast<std::ptrdiff_t>(t * d),
                                  latents.begin() + static_cast<std::ptrdiff_t>((t + 1) * d));
    out.latents.emplace_back(perturbed.begin() + static_cast<std::ptrdiff_t>(t * d),
                             perturbed.begin() + static_cast<std::ptrdiff_t>((t + 1) * d));
  }
  out.frames = model.decode_batch(perturbed);
  return out;
}

data::LatentTrajectory ae_project(const PoseAutoencoder& model, std::span<const Frame> seq) {
  data::LatentTrajectory traj;
  traj.latent_dim = model.latent_dim();
  traj.fps = model.fps;
  std::vector<Frame> prepared;
  for (const Frame& f : seq) prepared.push_back(model.prepare(f));
  const auto latents = model.encode_batch(prepared);
  const std::size_t d = model.latent_dim();
  for (std::size_t t = 0; t < seq.size(); ++t) {
    traj.points.emplace_back(latents.begin() + static_cast<std::ptrdiff_t>(t * d),
                             latents.begin() + static_cast<std::ptrdiff_t>((t + 1) * d));
  }
  return traj;
}

}  // namespace chor
