#include "chor/seq_rnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chor/adam.hpp"
#include "chor/error.hpp"

namespace chor {

using data::Frame;
using data::kFrameDim;

nlohmann::json to_json(const SeqRnnConfig& config) {
  return {{"layers", config.layers},
          {"prompt_length", config.prompt_length},
          {"predict_frames", config.predict_frames},
          {"num_mixtures", config.num_mixtures}};
}

SeqRnnConfig seq_rnn_config_from_json(const nlohmann::json& doc) {
  SeqRnnConfig config;
  if (doc.contains("layers")) config.layers = doc["layers"].get<std::vector<std::size_t>>();
  if (doc.contains("prompt_length")) config.prompt_length = doc["prompt_length"].get<std::size_t>();
  if (doc.contains("predict_frames")) config.predict_frames = doc["predict_frames"].get<std::size_t>();
  if (doc.contains("num_mixtures")) config.num_mixtures = doc["num_mixtures"].get<std::size_t>();
  return config;
}

SeqRnn::SeqRnn(SeqRnnConfig config, std::optional<PcaModel> pca, Rng& rng)
    : config_(std::move(config)), pca_(std::move(pca)), input_dim_(pca_ ? pca_->k() : kFrameDim) {
  if (config_.layers.empty()) throw InvalidArgument("seq rnn: needs at least one LSTM layer");
  if (config_.prompt_length == 0 || config_.predict_frames == 0 || config_.num_mixtures == 0) {
    throw InvalidArgument("seq rnn: m, n and M must be >= 1");
  }
  if (pca_ && pca_->dim() != kFrameDim) throw ShapeError("seq rnn: PCA model must be fitted on 159-d frames");
  std::size_t in = input_dim_;
  for (std::size_t l = 0; l < config_.layers.size(); ++l) {
    if (config_.layers[l] == 0) throw InvalidArgument("seq rnn: LSTM widths must be positive");
    stack_.push_back(layers::add_lstm(params_, "lstm." + std::to_string(l), in, config_.layers[l], rng));
    in = config_.layers[l];
  }
  head_ = layers::add_dense(params_, "mdn", in, mdn::raw_size(config_.num_mixtures, target_dim()), rng);
}

std::vector<double> SeqRnn::to_input(const Frame& frame) const {
  if (pca_) return pca_->transform(frame.coords);
  return {frame.coords.begin(), frame.coords.end()};
}

Frame SeqRnn::from_input(std::span<const double> values) const {
  if (values.size() != input_dim_) {
    throw ShapeError("seq rnn: expected " + std::to_string(input_dim_) + " values per frame, got " +
                     std::to_string(values.size()));
  }
  Frame f;
  if (pca_) {
    const auto x = pca_->inverse(values);
    std::copy(x.begin(), x.end(), f.coords.begin());
  } else {
    std::copy(values.begin(), values.end(), f.coords.begin());
  }
  return f;
}

ad::Var SeqRnn::forward(const BoundParams& p, std::span<const ad::Var> steps) const {
  if (steps.size() != config_.prompt_length) {
    throw InvalidArgument("seq rnn: prompt must hold exactly " + std::to_string(config_.prompt_length) +
                          " frames, got " + std::to_string(steps.size()));
  }
  ad::Tape& tape = *steps.front().tape;
  const auto outputs = layers::lstm_stack(tape, p, stack_, steps);
  return layers::dense(p, head_, outputs.back());
}

std::vector<double> SeqRnn::forward_raw(std::span<const double> prompt_inputs) const {
  const std::size_t m = config_.prompt_length;
  if (prompt_inputs.size() != m * input_dim_) {
    throw InvalidArgument("seq rnn: prompt must hold exactly " + std::to_string(m) + " frames");
  }
  ad::Tape tape;
  BoundParams p(tape, params_, false);
  std::vector<ad::Var> steps;
  steps.reserve(m);
  for (std::size_t s = 0; s < m; ++s) {
    const auto row = prompt_inputs.subspan(s * input_dim_, input_dim_);
    steps.push_back(tape.constant(Tensor(Shape{1, input_dim_}, std::vector<double>(row.begin(), row.end()))));
  }
  return forward(p, steps).value().to_vector();
}

mdn::MdnParams SeqRnn::predict(std::span<const Frame> prompt) const {
  if (prompt.size() != config_.prompt_length) {
    throw InvalidArgument("seq rnn: prompt must hold exactly " + std::to_string(config_.prompt_length) +
                          " frames, got " + std::to_string(prompt.size()));
  }
  std::vector<double> inputs;
  inputs.reserve(prompt.size() * input_dim_);
  for (const Frame& f : prompt) {
    const auto x = to_input(f);
    inputs.insert(inputs.end(), x.begin(), x.end());
  }
  return mdn::activate(forward_raw(inputs), config_.num_mixtures, target_dim());
}

namespace {

constexpr std::size_t kEvalChunk = 256;

// Network-coordinate rows of a frame range, row-major (frames x dim).
std::vector<double> project_frames(const SeqRnn& model, std::span<const Frame> frames) {
  std::vector<double> rows;
  rows.reserve(frames.size() * model.input_dim());
  for (const Frame& f : frames) {
    const auto x = model.to_input(f);
    rows.insert(rows.end(), x.begin(), x.end());
  }
  return rows;
}

struct WindowBatch {
  std::vector<Tensor> steps;
  Tensor targets;
};

WindowBatch gather(const SeqRnn& model, std::span<const double> rows, std::span<const std::size_t> offsets) {
  const std::size_t m = model.config().prompt_length;
  const std::size_t n = model.config().predict_frames;
  const std::size_t dim = model.input_dim();
  const std::size_t b = offsets.size();
  WindowBatch batch;
  for (std::size_t s = 0; s < m; ++s) {
    std::vector<double> step(b * dim);
    for (std::size_t k = 0; k < b; ++k) {
      std::copy_n(rows.data() + (offsets[k] + s) * dim, dim, step.data() + k * dim);
    }
    batch.steps.emplace_back(Shape{b, dim}, std::move(step));
  }
  std::vector<double> targets(b * n * dim);
  for (std::size_t k = 0; k < b; ++k) {
    std::copy_n(rows.data() + (offsets[k] + m) * dim, n * dim, targets.data() + k * n * dim);
  }
  batch.targets = Tensor(Shape{b, n * dim}, std::move(targets));
  return batch;
}

ad::Var batch_loss(const SeqRnn& model, ad::Tape& tape, const BoundParams& p, const WindowBatch& batch) {
  std::vector<ad::Var> steps;
  steps.reserve(batch.steps.size());
  for (const Tensor& t : batch.steps) steps.push_back(tape.constant(t));
  ad::Var raw = model.forward(p, steps);
  return mdn::nll(raw, tape.constant(batch.targets), model.config().num_mixtures, model.target_dim());
}

std::vector<std::size_t> window_offsets(std::size_t frames, std::size_t m, std::size_t n, std::size_t stride) {
  std::vector<std::size_t> offsets;
  for (std::size_t o = 0; o + m + n <= frames; o += stride) offsets.push_back(o);
  return offsets;
}

double mean_nll(const SeqRnn& model, std::span<const double> rows, std::span<const std::size_t> offsets) {
  if (offsets.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (std::size_t start = 0; start < offsets.size(); start += kEvalChunk) {
    const auto chunk = offsets.subspan(start, std::min(kEvalChunk, offsets.size() - start));
    ad::Tape tape;
    BoundParams p(tape, model.parameters(), false);
    total += batch_loss(model, tape, p, gather(model, rows, chunk)).value().item() * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(offsets.size());
}

}  // namespace

double rnn_nll(const SeqRnn& model, std::span<const Frame> frames, std::size_t stride) {
  const auto rows = project_frames(model, frames);
  const auto offsets =
      window_offsets(frames.size(), model.config().prompt_length, model.config().predict_frames, stride);
  return mean_nll(model, rows, offsets);
}

TrainingReport rnn_train(SeqRnn& model, const data::MotionDataset& dataset, const RnnTrainOptions& options) {
  if (options.batch_size == 0 || options.stride == 0) throw InvalidArgument("rnn_train: batch size and stride must be >= 1");
  const std::size_t m = model.config().prompt_length;
  const std::size_t n = model.config().predict_frames;
  const auto [train, test] = data::temporal_split(dataset.frames, options.train_fraction);
  const auto train_rows = project_frames(model, train);
  const auto test_rows = project_frames(model, test);
  const auto train_offsets = window_offsets(train.size(), m, n, options.stride);
  const auto test_offsets = window_offsets(test.size(), m, n, options.stride);
  if (train_offsets.empty()) throw InvalidArgument("rnn_train: training split is shorter than m + n frames");

  model.norm = dataset.norm;
  model.norm.per_frame_centroid.clear();
  model.norm.orientation.reset();
  model.fps = dataset.fps;

  TrainingReport report;
  auto evaluate = [&](std::size_t epoch) {
    EpochMetrics e;
    e.epoch = epoch;
    e.train_loss = mean_nll(model, train_rows, train_offsets);
    e.test_loss = mean_nll(model, test_rows, test_offsets);
    e.terms["train_nll"] = e.train_loss;
    e.terms["test_nll"] = e.test_loss;
    return e;
  };
  report.epochs.push_back(evaluate(0));

  Adam adam(AdamConfig{.learning_rate = options.learning_rate});
  ParameterSet last_good = model.parameters();
  for (std::size_t epoch = 1; epoch <= options.epochs && !report.aborted; ++epoch) {
    const auto order = shuffled_indices(train_offsets.size(), options.seed, epoch);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, order.size() - start);
      std::vector<std::size_t> offsets(count);
      for (std::size_t k = 0; k < count; ++k) offsets[k] = train_offsets[order[start + k]];
      std::vector<Tensor> grads;
      {
        ad::Tape tape;
        BoundParams p(tape, model.parameters(), true);
        ad::Var loss = batch_loss(model, tape, p, gather(model, train_rows, offsets));
        if (!std::isfinite(loss.value().item())) {
          report.aborted = true;
          report.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(report.steps);
          break;
        }
        tape.backward(loss);
        grads = collect_grads(tape, p);
      }
      try {
        adam.step(model.parameters().values(), grads);
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
  model.record.config["stride"] = options.stride;
  const EpochMetrics& last = report.final();
  model.record.metrics = {{"train_nll", last.train_loss}};
  if (std::isfinite(last.test_loss)) model.record.metrics["test_nll"] = last.test_loss;
  return report;
}

std::vector<Frame> rnn_generate(const SeqRnn& model, std::span<const Frame> prompt, std::size_t steps, Rng& rng,
                                double temperature) {
  const std::size_t m = model.config().prompt_length;
  const std::size_t n = model.config().predict_frames;
  const std::size_t dim = model.input_dim();
  if (prompt.size() != m) {
    throw InvalidArgument("rnn_generate: prompt must hold exactly " + std::to_string(m) + " frames, got " +
                          std::to_string(prompt.size()));
  }
  std::vector<double> window = project_frames(model, prompt);
  std::vector<Frame> out;
  out.reserve(steps * n);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto params = mdn::activate(model.forward_raw(window), model.config().num_mixtures, model.target_dim());
    const auto next = mdn::sample(params, rng, temperature);
    for (std::size_t f = 0; f < n; ++f) {
      out.push_back(model.from_input(std::span(next).subspan(f * dim, dim)));
    }
    window.insert(window.end(), next.begin(), next.end());
    window.erase(window.begin(), window.end() - static_cast<std::ptrdiff_t>(m * dim));
  }
  return out;
}

std::vector<Frame> constant_prompt(const SeqRnn& model, const Frame& frame) {
  return std::vector<Frame>(model.config().prompt_length, frame);
}

}  // namespace chor
