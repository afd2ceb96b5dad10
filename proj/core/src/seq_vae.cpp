#include "chor/seq_vae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "chor/adam.hpp"
#include "chor/data/augment.hpp"
#include "chor/error.hpp"

namespace chor {

using data::Frame;
using data::kFrameDim;

namespace {

constexpr double kLogvarLimit = 30.0;
constexpr std::size_t kEvalChunk = 64;

std::vector<std::size_t> sizes_from_json(const nlohmann::json& doc) {
  std::vector<std::size_t> out;
  for (const auto& v : doc) out.push_back(v.get<std::size_t>());
  return out;
}

// One B x 159 constant per time step.
std::vector<ad::Var> step_inputs(ad::Tape& tape, std::span<const data::Sequence> batch, std::size_t len) {
  std::vector<ad::Var> steps;
  steps.reserve(len);
  for (std::size_t s = 0; s < len; ++s) {
    std::vector<double> values;
    values.reserve(batch.size() * kFrameDim);
    for (const auto& seq : batch) values.insert(values.end(), seq[s].coords.begin(), seq[s].coords.end());
    steps.push_back(tape.constant(Tensor(Shape{batch.size(), kFrameDim}, std::move(values))));
  }
  return steps;
}

std::vector<data::Sequence> unstack(const Tensor& out, std::size_t len, std::size_t batch) {
  std::vector<data::Sequence> seqs(batch, data::Sequence(len));
  auto values = out.data();
  for (std::size_t s = 0; s < len; ++s) {
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(values.data() + (s * batch + b) * kFrameDim, kFrameDim, seqs[b][s].coords.begin());
    }
  }
  return seqs;
}

}  // namespace

nlohmann::json to_json(const SeqVaeConfig& config) {
  return {{"seq_len", config.seq_len},
          {"encoder_layers", config.encoder_layers},
          {"decoder_layers", config.decoder_layers},
          {"dense_dim", config.dense_dim},
          {"latent_dim", config.latent_dim},
          {"kl_weight", config.kl_weight},
          {"mse_scale", config.mse_scale}};
}

SeqVaeConfig seq_vae_config_from_json(const nlohmann::json& doc) {
  SeqVaeConfig config;
  if (doc.contains("seq_len")) config.seq_len = doc["seq_len"].get<std::size_t>();
  if (doc.contains("encoder_layers")) config.encoder_layers = sizes_from_json(doc["encoder_layers"]);
  if (doc.contains("decoder_layers")) config.decoder_layers = sizes_from_json(doc["decoder_layers"]);
  if (doc.contains("dense_dim")) config.dense_dim = doc["dense_dim"].get<std::size_t>();
  if (doc.contains("latent_dim")) config.latent_dim = doc["latent_dim"].get<std::size_t>();
  if (doc.contains("kl_weight")) config.kl_weight = doc["kl_weight"].get<double>();
  if (doc.contains("mse_scale")) config.mse_scale = doc["mse_scale"].get<double>();
  return config;
}

SequenceVae::SequenceVae(SeqVaeConfig config, Rng& rng) : config_(std::move(config)) {
  if (config_.seq_len == 0) throw InvalidArgument("sequence vae: seq_len must be >= 1");
  if (config_.encoder_layers.empty() || config_.decoder_layers.empty()) {
    throw InvalidArgument("sequence vae: encoder and decoder need at least one LSTM layer");
  }
  if (config_.dense_dim == 0 || config_.latent_dim == 0) {
    throw InvalidArgument("sequence vae: dense_dim and latent_dim must be positive");
  }
  for (auto w : config_.encoder_layers) {
    if (w == 0) throw InvalidArgument("sequence vae: LSTM widths must be positive");
  }
  for (auto w : config_.decoder_layers) {
    if (w == 0) throw InvalidArgument("sequence vae: LSTM widths must be positive");
  }
  std::size_t in = kFrameDim;
  for (std::size_t l = 0; l < config_.encoder_layers.size(); ++l) {
    encoder_stack_.push_back(
        layers::add_lstm(params_, "encoder.lstm." + std::to_string(l), in, config_.encoder_layers[l], rng));
    in = config_.encoder_layers[l];
  }
  encoder_dense_ = layers::add_dense(params_, "encoder.dense", in, config_.dense_dim, rng);
  mean_head_ = layers::add_dense(params_, "encoder.mean", config_.dense_dim, config_.latent_dim, rng);
  logvar_head_ = layers::add_dense(params_, "encoder.logvar", config_.dense_dim, config_.latent_dim, rng);
  decoder_dense_ = layers::add_dense(params_, "decoder.dense", config_.latent_dim, config_.dense_dim, rng);
  in = config_.dense_dim;
  for (std::size_t l = 0; l < config_.decoder_layers.size(); ++l) {
    decoder_stack_.push_back(
        layers::add_lstm(params_, "decoder.lstm." + std::to_string(l), in, config_.decoder_layers[l], rng));
    in = config_.decoder_layers[l];
  }
  output_ = layers::add_dense(params_, "decoder.output", in, kFrameDim, rng);
}

SequenceVae::Heads SequenceVae::encode(const BoundParams& p, std::span<const ad::Var> steps) const {
  if (steps.size() != config_.seq_len) {
    throw ShapeError("sequence vae: expected " + std::to_string(config_.seq_len) + " steps, got " +
                     std::to_string(steps.size()));
  }
  ad::Tape& tape = *steps.front().tape;
  const auto hidden = layers::lstm_stack(tape, p, encoder_stack_, steps);
  ad::Var h = ad::relu(layers::dense(p, encoder_dense_, hidden.back()));
  return {layers::dense(p, mean_head_, h),
          ad::clamp(layers::dense(p, logvar_head_, h), -kLogvarLimit, kLogvarLimit)};
}

ad::Var SequenceVae::decode(const BoundParams& p, ad::Var z) const {
  ad::Tape& tape = *z.tape;
  ad::Var h = ad::relu(layers::dense(p, decoder_dense_, z));
  const std::vector<ad::Var> inputs(config_.seq_len, h);
  const auto hidden = layers::lstm_stack(tape, p, decoder_stack_, inputs);
  return layers::dense(p, output_, ad::concat(hidden, 0));
}

LatentGaussian SequenceVae::encode(std::span<const Frame> seq) const {
  if (seq.size() != config_.seq_len) {
    throw ShapeError("sequence vae: expected a sequence of " + std::to_string(config_.seq_len) + " frames, got " +
                     std::to_string(seq.size()));
  }
  ad::Tape tape;
  BoundParams p(tape, params_, false);
  const data::Sequence copy(seq.begin(), seq.end());
  const auto steps = step_inputs(tape, std::span(&copy, 1), config_.seq_len);
  const Heads heads = encode(p, steps);
  return {heads.mean.value().to_vector(), heads.logvar.value().to_vector()};
}

std::vector<data::Sequence> SequenceVae::decode_batch(std::span<const double> latents) const {
  const std::size_t d = config_.latent_dim;
  if (latents.size() % d != 0) {
    throw ShapeError("sequence vae: latent block of " + std::to_string(latents.size()) +
                     " values is not a multiple of latent_dim " + std::to_string(d));
  }
  const std::size_t n = latents.size() / d;
  if (n == 0) return {};
  ad::Tape tape;
  BoundParams p(tape, params_, false);
  ad::Var z = tape.constant(Tensor(Shape{n, d}, std::vector<double>(latents.begin(), latents.end())));
  return unstack(decode(p, z).value(), config_.seq_len, n);
}

data::Sequence SequenceVae::decode(std::span<const double> z) const {
  if (z.size() != config_.latent_dim) {
    throw ShapeError("sequence vae: expected latent of dimension " + std::to_string(config_.latent_dim) + ", got " +
                     std::to_string(z.size()));
  }
  return decode_batch(z).front();
}

VaeLossVars vae_loss(const SequenceVae& model, const BoundParams& p, std::span<const ad::Var> steps,
                     const ad::Var* noise) {
  const auto heads = model.encode(p, steps);
  ad::Var z = heads.mean;
  if (noise) z = heads.mean + ad::exp(ad::scale(heads.logvar, 0.5)) * *noise;
  ad::Var recon = model.decode(p, z);
  ad::Var target = ad::concat(steps, 0);
  ad::Var mse = ad::mse(recon, target);
  const double batch = static_cast<double>(heads.mean.shape()[0]);
  ad::Var kl_terms = ad::square(heads.mean) + ad::exp(heads.logvar) - heads.logvar;
  ad::Var kl = ad::scale(ad::add_scalar(ad::sum(kl_terms), -static_cast<double>(heads.mean.value().size())),
                         0.5 / batch);
  ad::Var total = ad::scale(mse, model.config().mse_scale) + ad::scale(kl, model.config().kl_weight);
  return {total, mse, kl};
}

VaeLossValue vae_loss(const SequenceVae& model, std::span<const data::Sequence> batch, Rng* rng) {
  if (batch.empty()) throw InvalidArgument("vae_loss: empty batch");
  for (const auto& seq : batch) {
    if (seq.size() != model.seq_len()) throw ShapeError("vae_loss: sequence length does not match seq_len");
  }
  ad::Tape tape;
  BoundParams p(tape, model.parameters(), false);
  const auto steps = step_inputs(tape, batch, model.seq_len());
  std::optional<ad::Var> noise;
  if (rng) {
    std::vector<double> eps(batch.size() * model.latent_dim());
    for (double& e : eps) e = rng->normal(0.0, 1.0);
    noise = tape.constant(Tensor(Shape{batch.size(), model.latent_dim()}, std::move(eps)));
  }
  const auto vars = vae_loss(model, p, steps, noise ? &*noise : nullptr);
  return {vars.total.value().item(), vars.mse.value().item(), vars.kl.value().item()};
}

double gaussian_kl(std::span<const double> mean, std::span<const double> logvar) {
  if (mean.size() != logvar.size()) throw ShapeError("gaussian_kl: mean and logvar differ in size");
  double kl = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    kl += mean[i] * mean[i] + std::exp(logvar[i]) - 1.0 - logvar[i];
  }
  return 0.5 * kl;
}

std::vector<double> reparameterize(const LatentGaussian& q, Rng& rng) {
  std::vector<double> z(q.mean.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = q.mean[i] + std::exp(0.5 * q.logvar[i]) * rng.normal(0.0, 1.0);
  return z;
}

namespace {

VaeLossValue mean_loss(const SequenceVae& model, std::span<const data::Sequence> seqs) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (seqs.empty()) return {nan, nan, nan};
  VaeLossValue total;
  for (std::size_t start = 0; start < seqs.size(); start += kEvalChunk) {
    const auto chunk = seqs.subspan(start, std::min(kEvalChunk, seqs.size() - start));
    const auto v = vae_loss(model, chunk);
    const double w = static_cast<double>(chunk.size());
    total.mse += v.mse * w;
    total.kl += v.kl * w;
  }
  const double n = static_cast<double>(seqs.size());
  total.mse /= n;
  total.kl /= n;
  total.total = model.config().mse_scale * total.mse + model.config().kl_weight * total.kl;
  return total;
}

std::vector<data::Sequence> cut(std::span<const Frame> frames, std::size_t len, std::size_t stride) {
  std::vector<data::Sequence> out;
  if (frames.size() < len) return out;
  for (auto s : data::make_sequences(frames, len, stride)) out.emplace_back(s.begin(), s.end());
  return out;
}

}  // namespace

TrainingReport vae_train(SequenceVae& model, const data::MotionDataset& dataset, const VaeTrainOptions& options) {
  if (options.batch_size == 0) throw InvalidArgument("vae_train: batch size must be >= 1");
  const std::size_t len = model.seq_len();
  const std::size_t stride = options.stride ? options.stride : len;
  const auto [train_frames, test_frames] = data::temporal_split(dataset.frames, options.train_fraction);
  const auto train = cut(train_frames, len, stride);
  const auto test = cut(test_frames, len, stride);
  if (train.empty()) {
    throw InvalidArgument("vae_train: training split has " + std::to_string(train_frames.size()) +
                          " frames, fewer than seq_len " + std::to_string(len));
  }

  model.norm = dataset.norm;
  model.norm.per_frame_centroid.clear();
  model.norm.orientation.reset();
  model.fps = dataset.fps;

  TrainingReport report;
  auto evaluate = [&](std::size_t epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    const auto tr = mean_loss(model, train);
    const auto te = mean_loss(model, test);
    m.train_loss = tr.total;
    m.test_loss = te.total;
    m.terms = {{"train_mse", tr.mse}, {"train_kl", tr.kl}, {"test_mse", te.mse}, {"test_kl", te.kl}};
    return m;
  };
  report.epochs.push_back(evaluate(0));

  Adam adam(AdamConfig{.learning_rate = options.learning_rate});
  Rng root(options.seed);
  ParameterSet last_good = model.parameters();

  for (std::size_t epoch = 1; epoch <= options.epochs && !report.aborted; ++epoch) {
    const auto order = shuffled_indices(train.size(), options.seed, epoch);
    Rng epoch_rng = root.split("vae").split(epoch);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, order.size() - start);
      std::vector<data::Sequence> batch;
      batch.reserve(count);
      for (std::size_t k = 0; k < count; ++k) batch.push_back(train[order[start + k]]);
      if (options.rotate_augment) batch = data::rotate_augment(batch, epoch_rng).sequences;

      ad::Tape tape;
      BoundParams p(tape, model.parameters(), true);
      const auto steps = step_inputs(tape, batch, len);
      std::optional<ad::Var> noise;
      if (!options.deterministic_latent) {
        std::vector<double> eps(count * model.latent_dim());
        for (double& e : eps) e = epoch_rng.normal(0.0, 1.0);
        noise = tape.constant(Tensor(Shape{count, model.latent_dim()}, std::move(eps)));
      }
      const auto loss = vae_loss(model, p, steps, noise ? &*noise : nullptr);
      if (!std::isfinite(loss.total.value().item())) {
        report.aborted = true;
        report.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(report.steps);
        break;
      }
      tape.backward(loss.total);
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
  model.record.config = to_json(static_cast<const TrainOptions&>(options));
  model.record.config["stride"] = stride;
  model.record.config["rotate_augment"] = options.rotate_augment;
  model.record.config["deterministic_latent"] = options.deterministic_latent;
  const EpochMetrics& last = report.final();
  model.record.metrics = {{"train_loss", last.train_loss}, {"train_mse", last.terms.at("train_mse")},
                          {"train_kl", last.terms.at("train_kl")}};
  if (std::isfinite(last.test_loss)) {
    model.record.metrics["test_loss"] = last.test_loss;
    model.record.metrics["test_mse"] = last.terms.at("test_mse");
  }
  return report;
}

data::Sequence vae_sample_unconditional(const SequenceVae& model, Rng& rng, double radius) {
  std::vector<double> z(model.latent_dim());
  for (double& v : z) v = radius * rng.normal(0.0, 1.0);
  return model.decode(z);
}

std::vector<data::Sequence> vae_vary(const SequenceVae& model, const VariationRequest& request) {
  if (request.count == 0) return {};
  if (!std::isfinite(request.noise_scale) || request.noise_scale < 0.0) {
    throw InvalidArgument("vae_vary: noise scale must be finite and non-negative");
  }
  const auto q = model.encode(request.base);
  const std::size_t d = model.latent_dim();
  Rng rng = Rng(request.seed).split("vary");
  std::vector<double> latents;
  latents.reserve(request.count * d);
  for (std::size_t i = 0; i < request.count; ++i) {
    for (std::size_t j = 0; j < d; ++j) latents.push_back(q.mean[j] + request.noise_scale * rng.normal(0.0, 1.0));
  }
  return model.decode_batch(latents);
}

data::Sequence vae_reconstruct(const SequenceVae& model, std::span<const Frame> seq) {
  return model.decode(model.encode(seq).mean);
}

double sequence_deviation(std::span<const Frame> a, std::span<const Frame> b) {
  if (a.size() != b.size()) throw ShapeError("sequence_deviation: sequences differ in length");
  if (a.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t v = 0; v < data::kVertexCount; ++v) {
      double sq = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        const double d = a[t].coords[3 * v + k] - b[t].coords[3 * v + k];
        sq += d * d;
      }
      total += std::sqrt(sq);
    }
  }
  return total / static_cast<double>(a.size() * data::kVertexCount);
}

data::LatentTrajectory vae_project_to_pose_space(const SequenceVae& vae, const PoseAutoencoder& pose_model,
                                                 std::span<const Frame> seq) {
  if (seq.size() != vae.seq_len()) {
    throw ShapeError("vae_project_to_pose_space: expected " + std::to_string(vae.seq_len()) + " frames, got " +
                     std::to_string(seq.size()));
  }
  return ae_project(pose_model, seq);
}

}  // namespace chor
