#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "chor/checkpoint.hpp"
#include "chor/data/motion.hpp"

namespace chor::service {

inline constexpr std::size_t kDefaultBodyLimit = 8 * 1024 * 1024;

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Registry name -> checkpoint path. The kind is read from the file.
  std::map<std::string, std::filesystem::path> models;
  /// Registry name -> animation or CSV file served as raw frames.
  std::map<std::string, std::filesystem::path> datasets;
  std::filesystem::path static_dir;
  std::size_t body_limit = kDefaultBodyLimit;
};

/// Relative paths resolve against `base_dir`.
ServeConfig serve_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ServeConfig load_serve_config(const std::filesystem::path& path);
nlohmann::json to_json(const ServeConfig& config);

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

/// Per-request stream derived from the client seed and the endpoint path.
std::uint64_t request_seed(std::uint64_t seed, std::string_view endpoint);

/// Inference API over a registry of read-only models. All frames crossing the
/// API are in raw units; each model's stored normalization maps them into and
/// out of model space.
class Service {
 public:
  /// Loads every registered checkpoint and dataset; throws on the first failure.
  explicit Service(ServeConfig config);

  const ServeConfig& config() const { return config_; }
  Response handle(const Request& request) const;

 private:
  struct Dataset {
    double fps = data::kDefaultFps;
    std::vector<data::Frame> frames;
  };

  Response models() const;
  Response decode_trajectory(const nlohmann::json& body) const;
  Response project(const nlohmann::json& body) const;
  Response vae_sample(const nlohmann::json& body) const;
  Response vae_vary(const nlohmann::json& body) const;
  Response rnn_generate(const nlohmann::json& body) const;
  Response dataset_frames(const std::string& name, const std::map<std::string, std::string>& query) const;
  Response index() const;

  template <typename Model>
  const Model& model_of(const nlohmann::json& body) const;

  ServeConfig config_;
  std::map<std::string, store::AnyModel> models_;
  std::map<std::string, Dataset> datasets_;
};

/// Blocking HTTP front end. Static assets are mounted from static_dir.
class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind();
  void listen_after_bind();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace chor::service
