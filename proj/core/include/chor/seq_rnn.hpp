#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "chor/autodiff.hpp"
#include "chor/data/motion.hpp"
#include "chor/mdn.hpp"
#include "chor/params.hpp"
#include "chor/pca.hpp"
#include "chor/rng.hpp"
#include "chor/training.hpp"

namespace chor {

struct SeqRnnConfig {
  std::vector<std::size_t> layers{128, 128, 128};
  std::size_t prompt_length = 32;   // m
  std::size_t predict_frames = 1;   // n
  std::size_t num_mixtures = 8;     // M
};

nlohmann::json to_json(const SeqRnnConfig& config);
SeqRnnConfig seq_rnn_config_from_json(const nlohmann::json& doc);

/// LSTM stack over an m-frame prompt followed by a mixture density head over
/// the next n frames, modelled jointly (c = n * input_dim). With a PCA model
/// the network works on k-dimensional projections of each frame.
class SeqRnn {
 public:
  SeqRnn(SeqRnnConfig config, std::optional<PcaModel> pca, Rng& rng);

  const SeqRnnConfig& config() const { return config_; }
  const std::optional<PcaModel>& pca() const { return pca_; }
  std::size_t input_dim() const { return input_dim_; }
  /// c of the mixture head.
  std::size_t target_dim() const { return config_.predict_frames * input_dim_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// Frame in network coordinates (PCA projection when configured).
  std::vector<double> to_input(const data::Frame& frame) const;
  data::Frame from_input(std::span<const double> values) const;

  /// Raw head output (B x raw_size) for `steps`, each a B x input_dim tensor.
  ad::Var forward(const BoundParams& p, std::span<const ad::Var> steps) const;
  /// Raw head output for one prompt given in network coordinates (m x input_dim).
  std::vector<double> forward_raw(std::span<const double> prompt_inputs) const;

  /// Mixture over the flattened next n frames. Throws InvalidArgument unless
  /// the prompt holds exactly m frames.
  mdn::MdnParams predict(std::span<const data::Frame> prompt) const;

  data::NormalizationParams norm;
  double fps = data::kDefaultFps;
  TrainingRecord record;

 private:
  SeqRnnConfig config_;
  std::optional<PcaModel> pca_;
  std::size_t input_dim_;
  ParameterSet params_;
  std::vector<layers::Lstm> stack_;
  layers::Dense head_;
};

struct RnnTrainOptions : TrainOptions {
  RnnTrainOptions() { learning_rate = 1e-5; }
  std::size_t stride = 1;
};

/// Teacher-forced NLL minimisation over (m, n) windows of the temporal train
/// split; test windows come from the remaining frames.
TrainingReport rnn_train(SeqRnn& model, const data::MotionDataset& dataset, const RnnTrainOptions& options);

/// Mean NLL over every window of `frames` (NaN when there are none).
double rnn_nll(const SeqRnn& model, std::span<const data::Frame> frames, std::size_t stride = 1);

/// Autoregressive continuation: predicts n frames, appends them, slides the
/// m-frame window by n, and repeats `steps` times; returns steps * n frames.
std::vector<data::Frame> rnn_generate(const SeqRnn& model, std::span<const data::Frame> prompt, std::size_t steps,
                                      Rng& rng, double temperature = 1.0);

/// Prompt of m copies of one dataset frame, for unconditional generation.
std::vector<data::Frame> constant_prompt(const SeqRnn& model, const data::Frame& frame);

}  // namespace chor
