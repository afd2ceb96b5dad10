#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace chor {

/// Hyperparameters shared by every trainer.
struct TrainOptions {
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  /// Called after every completed epoch (e.g. to write a checkpoint).
  std::function<void(std::size_t epoch)> on_epoch_end;
};

nlohmann::json to_json(const TrainOptions& options);
/// Overrides fields of `options` present in `doc`.
void merge_json(TrainOptions& options, const nlohmann::json& doc);

struct EpochMetrics {
  std::size_t epoch = 0;  // 0 = before the first update
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::map<std::string, double> terms;
};

struct TrainingReport {
  std::vector<EpochMetrics> epochs;
  std::size_t steps = 0;
  bool aborted = false;
  std::string abort_reason;

  const EpochMetrics& initial() const { return epochs.front(); }
  const EpochMetrics& final() const { return epochs.back(); }
  std::vector<double> train_curve() const;
};

nlohmann::json to_json(const TrainingReport& report);

/// Provenance stored alongside trained parameters.
struct TrainingRecord {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json metrics = nlohmann::json::object();

  bool operator==(const TrainingRecord&) const = default;
};

/// Epoch-order permutation of [0, n) for one epoch.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace chor
