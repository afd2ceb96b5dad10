#include "chor/training.hpp"

#include <algorithm>
#include <numeric>

#include "chor/rng.hpp"

namespace chor {

nlohmann::json to_json(const TrainOptions& options) {
  return {{"epochs", options.epochs},
          {"batch_size", options.batch_size},
          {"learning_rate", options.learning_rate},
          {"seed", options.seed},
          {"train_fraction", options.train_fraction}};
}

void merge_json(TrainOptions& options, const nlohmann::json& doc) {
  if (doc.contains("epochs")) options.epochs = doc["epochs"].get<std::size_t>();
  if (doc.contains("batch_size")) options.batch_size = doc["batch_size"].get<std::size_t>();
  if (doc.contains("learning_rate")) options.learning_rate = doc["learning_rate"].get<double>();
  if (doc.contains("seed")) options.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("train_fraction")) options.train_fraction = doc["train_fraction"].get<double>();
}

std::vector<double> TrainingReport::train_curve() const {
  std::vector<double> curve;
  for (const auto& e : epochs) curve.push_back(e.train_loss);
  return curve;
}

nlohmann::json to_json(const TrainingReport& report) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : report.epochs) {
    nlohmann::json row = {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"test_loss", e.test_loss}};
    for (const auto& [name, value] : e.terms) row[name] = value;
    epochs.push_back(std::move(row));
  }
  return {{"epochs", std::move(epochs)},
          {"steps", report.steps},
          {"aborted", report.aborted},
          {"abort_reason", report.abort_reason}};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng(seed).split("shuffle").split(epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

}  // namespace chor
