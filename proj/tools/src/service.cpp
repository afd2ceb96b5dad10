#include "chor_tools/service.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "chor/data/io.hpp"
#include "chor/data/normalize.hpp"
#include "chor/data/synth.hpp"

namespace chor::service {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxCount = 64;
constexpr std::size_t kMaxFrames = 20000;
constexpr std::size_t kMaxDatasetSlice = 3000;

struct ApiError {
  int status;
  std::string field;
  std::string message;
};

Response error_response(int status, const std::string& field, const std::string& message) {
  json err{{"status", status}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  return {status, json{{"error", err}}.dump()};
}

Response ok(const json& body) { return {200, body.dump()}; }

[[noreturn]] void bad(const std::string& field, const std::string& message, int status = 400) {
  throw ApiError{status, field, message};
}

const json& require(const json& body, const char* field) {
  if (!body.contains(field)) bad(field, "required");
  return body[field];
}

std::string get_string(const json& body, const char* field) {
  const json& v = require(body, field);
  if (!v.is_string()) bad(field, "must be a string");
  return v.get<std::string>();
}

std::size_t get_size(const json& body, const char* field, std::size_t fallback, std::size_t lo, std::size_t hi) {
  if (!body.contains(field)) return fallback;
  const json& v = body[field];
  if (!v.is_number_unsigned()) bad(field, "must be a non-negative integer");
  const auto n = v.get<std::uint64_t>();
  if (n < lo || n > hi) bad(field, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<std::size_t>(n);
}

double get_number(const json& body, const char* field, double fallback, double lo, double hi) {
  if (!body.contains(field)) return fallback;
  const json& v = body[field];
  if (!v.is_number()) bad(field, "must be a number");
  const double x = v.get<double>();
  if (!(x >= lo && x <= hi)) {
    std::ostringstream msg;
    msg << "must be in [" << lo << ", " << hi << "]";
    bad(field, msg.str());
  }
  return x;
}

std::uint64_t get_seed(const json& body) {
  if (!body.contains("seed")) return 0;
  if (!body["seed"].is_number_unsigned()) bad("seed", "must be a non-negative integer");
  return body["seed"].get<std::uint64_t>();
}

std::vector<data::Frame> get_frames(const json& body, const char* field) {
  const json& v = require(body, field);
  if (!v.is_array()) bad(field, "must be an array of frames");
  if (v.size() > kMaxFrames) bad(field, "too many frames");
  std::vector<data::Frame> frames;
  frames.reserve(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string where = std::string(field) + "[" + std::to_string(k) + "]";
    const json& f = v[k];
    if (!f.is_array()) bad(where, "must be an array of [x, y, z] vertices");
    if (f.size() != data::kVertexCount) {
      bad(where, "expected 53 vertices, got " + std::to_string(f.size()), 422);
    }
    data::Frame frame;
    for (std::size_t i = 0; i < data::kVertexCount; ++i) {
      const json& p = f[i];
      if (!p.is_array() || p.size() != 3) bad(where + "[" + std::to_string(i) + "]", "must be [x, y, z]");
      for (std::size_t a = 0; a < 3; ++a) {
        if (!p[a].is_number() || !std::isfinite(p[a].get<double>())) {
          bad(where + "[" + std::to_string(i) + "]", "coordinates must be finite numbers");
        }
        frame.coords[3 * i + a] = p[a].get<double>();
      }
    }
    frames.push_back(frame);
  }
  return frames;
}

template <typename Model>
json animation(const Model& model, std::span<const data::Frame> frames) {
  return data::animation_to_json(data::invert_normalization(model.norm, frames), model.fps);
}

template <typename Model>
std::vector<data::Frame> to_model_space(const Model& model, std::span<const data::Frame> raw) {
  return data::apply_normalization(model.norm, raw);
}

template <typename Model>
constexpr std::string_view kind_name() {
  if constexpr (std::is_same_v<Model, PoseAutoencoder>) return store::kPoseAe;
  if constexpr (std::is_same_v<Model, SequenceVae>) return store::kSeqVae;
  return store::kSeqRnn;
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.is_relative() && !base.empty() ? base / p : p;
}

std::size_t parse_query(const std::map<std::string, std::string>& query, const char* key, std::size_t fallback) {
  const auto it = query.find(key);
  if (it == query.end()) return fallback;
  std::size_t v = 0;
  const auto& s = it->second;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) bad(key, "must be a non-negative integer");
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

constexpr const char* kPlaceholder =
    "<!doctype html><html><head><title>chor</title></head><body>"
    "<h1>chor service</h1><p>No UI bundle is configured. The JSON API lives under /api/.</p>"
    "</body></html>";

}  // namespace

ServeConfig serve_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw data::FormatError("serve config: must be an object");
  ServeConfig c;
  try {
    if (doc.contains("host")) c.host = doc["host"].get<std::string>();
    if (doc.contains("port")) c.port = doc["port"].get<int>();
    if (c.port < 0 || c.port > 65535) throw data::FormatError("serve config: port out of range");
    if (doc.contains("static_dir")) c.static_dir = resolve(doc["static_dir"].get<std::string>(), base_dir);
    if (doc.contains("body_limit")) c.body_limit = doc["body_limit"].get<std::size_t>();
    if (doc.contains("models")) {
      for (const auto& [name, path] : doc["models"].items()) c.models[name] = resolve(path.get<std::string>(), base_dir);
    }
    if (doc.contains("datasets")) {
      for (const auto& [name, path] : doc["datasets"].items()) {
        c.datasets[name] = resolve(path.get<std::string>(), base_dir);
      }
    }
  } catch (const json::exception& e) {
    throw data::FormatError(std::string("serve config: ") + e.what());
  }
  return c;
}

ServeConfig load_serve_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(data::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw data::FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return serve_config_from_json(doc, path.parent_path());
}

json to_json(const ServeConfig& config) {
  json doc{{"host", config.host}, {"port", config.port}, {"body_limit", config.body_limit}};
  if (!config.static_dir.empty()) doc["static_dir"] = config.static_dir.string();
  doc["models"] = json::object();
  for (const auto& [name, path] : config.models) doc["models"][name] = path.string();
  doc["datasets"] = json::object();
  for (const auto& [name, path] : config.datasets) doc["datasets"][name] = path.string();
  return doc;
}

std::uint64_t request_seed(std::uint64_t seed, std::string_view endpoint) { return Rng(seed).split(endpoint).seed(); }

Service::Service(ServeConfig config) : config_(std::move(config)) {
  for (const auto& [name, path] : config_.models) {
    spdlog::info("loading model '{}' from {}", name, path.string());
    models_.emplace(name, store::load_any(path));
  }
  for (const auto& [name, path] : config_.datasets) {
    auto ds = data::load_dataset(path);
    datasets_.emplace(name, Dataset{ds.fps, std::move(ds.frames)});
  }
}

template <typename Model>
const Model& Service::model_of(const json& body) const {
  const std::string name = get_string(body, "model");
  const auto it = models_.find(name);
  if (it == models_.end()) bad("model", "unknown model '" + name + "'", 404);
  const Model* m = std::get_if<Model>(&it->second);
  if (!m) {
    bad("model", "model '" + name + "' is a " + store::kind_of(it->second) + ", expected " +
                     std::string(kind_name<Model>()), 422);
  }
  return *m;
}

Response Service::handle(const Request& request) const {
  try {
    if (request.body.size() > config_.body_limit) return error_response(413, "", "request body too large");
    if (request.method == "GET") {
      if (request.path == "/" || request.path == "/index.html") return index();
      if (request.path == "/api/models") return models();
      const std::string prefix = "/api/dataset/", suffix = "/frames";
      if (request.path.starts_with(prefix) && request.path.ends_with(suffix) &&
          request.path.size() > prefix.size() + suffix.size()) {
        return dataset_frames(request.path.substr(prefix.size(), request.path.size() - prefix.size() - suffix.size()),
                              request.query);
      }
      return error_response(404, "", "no such resource");
    }
    if (request.method != "POST") return error_response(405, "", "method not allowed");
    using Handler = Response (Service::*)(const json&) const;
    static const std::map<std::string, Handler> routes{
        {"/api/pose/decode-trajectory", &Service::decode_trajectory},
        {"/api/pose/project", &Service::project},
        {"/api/vae/sample", &Service::vae_sample},
        {"/api/vae/vary", &Service::vae_vary},
        {"/api/rnn/generate", &Service::rnn_generate},
    };
    const auto route = routes.find(request.path);
    if (route == routes.end()) return error_response(404, "", "no such resource");
    json body;
    try {
      body = json::parse(request.body);
    } catch (const json::parse_error& e) {
      return error_response(400, "body", "invalid JSON");
    }
    if (!body.is_object()) return error_response(400, "body", "must be a JSON object");
    return (this->*(route->second))(body);
  } catch (const ApiError& e) {
    return error_response(e.status, e.field, e.message);
  } catch (const ShapeError& e) {
    return error_response(422, "", e.what());
  } catch (const InvalidArgument& e) {
    return error_response(400, "", e.what());
  } catch (const std::exception& e) {
    spdlog::error("{} {}: {}", request.method, request.path, e.what());
    return error_response(500, "", "internal error");
  }
}

Response Service::models() const {
  json list = json::array();
  for (const auto& [name, model] : models_) {
    json entry{{"name", name}, {"kind", store::kind_of(model)}};
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          entry["fps"] = m.fps;
          if constexpr (std::is_same_v<M, PoseAutoencoder>) {
            entry["latent_dim"] = m.config().latent_dim;
          } else if constexpr (std::is_same_v<M, SequenceVae>) {
            entry["latent_dim"] = m.latent_dim();
            entry["seq_len"] = m.seq_len();
          } else {
            entry["prompt_length"] = m.config().prompt_length;
            entry["predict_frames"] = m.config().predict_frames;
            entry["pca_components"] = m.pca() ? json(m.pca()->k()) : json(nullptr);
          }
        },
        model);
    list.push_back(std::move(entry));
  }
  json datasets = json::array();
  for (const auto& [name, ds] : datasets_) {
    datasets.push_back({{"name", name}, {"frames", ds.frames.size()}, {"fps", ds.fps}});
  }
  json edges = json::array();
  for (const auto& [a, b] : data::synth_skeleton_edges()) edges.push_back({a, b});
  return ok({{"models", list}, {"datasets", datasets}, {"skeleton_edges", edges}});
}

Response Service::decode_trajectory(const json& body) const {
  const auto& model = model_of<PoseAutoencoder>(body);
  const json& points = require(body, "points");
  if (!points.is_array() || points.empty()) bad("points", "must be a non-empty array of latent points");
  data::LatentTrajectory traj;
  traj.latent_dim = model.config().latent_dim;
  traj.fps = model.fps;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const std::string where = "points[" + std::to_string(k) + "]";
    const json& p = points[k];
    if (!p.is_array()) bad(where, "must be an array of numbers");
    if (p.size() != traj.latent_dim) {
      bad(where, "expected " + std::to_string(traj.latent_dim) + " coordinates, got " + std::to_string(p.size()), 422);
    }
    std::vector<double> point;
    for (const json& v : p) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) bad(where, "coordinates must be finite numbers");
      point.push_back(v.get<double>());
    }
    traj.points.push_back(std::move(point));
  }
  Interpolation interp = Interpolation::kLinear;
  if (body.contains("interpolation")) {
    const std::string name = get_string(body, "interpolation");
    if (name == "catmull_rom") {
      interp = Interpolation::kCatmullRom;
    } else if (name != "linear") {
      bad("interpolation", "must be 'linear' or 'catmull_rom'");
    }
  }
  const std::size_t samples = get_size(body, "samples_per_segment", 1, 1, 1000);
  if ((traj.points.size() - 1) * samples + 1 > kMaxFrames) bad("samples_per_segment", "trajectory too long");
  return ok(animation(model, ae_decode_trajectory(model, traj, interp, samples)));
}

Response Service::project(const json& body) const {
  const auto& model = model_of<PoseAutoencoder>(body);
  const auto frames = get_frames(body, "frames");
  auto traj = ae_project(model, to_model_space(model, frames));
  traj.fps = model.fps;
  return ok(data::trajectory_to_json(traj));
}

Response Service::vae_sample(const json& body) const {
  const auto& model = model_of<SequenceVae>(body);
  const std::size_t count = get_size(body, "count", 1, 1, kMaxCount);
  const double radius = get_number(body, "radius", 1.0, 0.0, 100.0);
  Rng rng(request_seed(get_seed(body), "/api/vae/sample"));
  json list = json::array();
  for (std::size_t i = 0; i < count; ++i) list.push_back(animation(model, vae_sample_unconditional(model, rng, radius)));
  return ok({{"animations", list}});
}

Response Service::vae_vary(const json& body) const {
  const auto& model = model_of<SequenceVae>(body);
  const auto frames = get_frames(body, "frames");
  if (frames.size() != model.seq_len()) {
    bad("frames", "expected " + std::to_string(model.seq_len()) + " frames, got " + std::to_string(frames.size()), 422);
  }
  VariationRequest req;
  req.base = to_model_space(model, frames);
  req.noise_scale = get_number(body, "sigma", 0.5, 0.0, 100.0);
  req.count = get_size(body, "count", 1, 1, kMaxCount);
  req.seed = request_seed(get_seed(body), "/api/vae/vary");
  const auto variations = chor::vae_vary(model, req);
  const auto recon = vae_reconstruct(model, req.base);
  json list = json::array(), deviations = json::array();
  double total = 0.0;
  for (const auto& v : variations) {
    const double d = sequence_deviation(v, recon) / model.norm.scale;
    deviations.push_back(d);
    total += d;
    list.push_back(animation(model, v));
  }
  return ok({{"animations", list},
             {"reconstruction", animation(model, recon)},
             {"deviations", deviations},
             {"mean_deviation", total / static_cast<double>(variations.size())}});
}

Response Service::rnn_generate(const json& body) const {
  const auto& model = model_of<SeqRnn>(body);
  const auto prompt = get_frames(body, "prompt_frames");
  const std::size_t m = model.config().prompt_length;
  if (prompt.size() != m) {
    bad("prompt_frames", "expected " + std::to_string(m) + " frames, got " + std::to_string(prompt.size()), 422);
  }
  const std::size_t steps = get_size(body, "steps", 1, 0, kMaxFrames / model.config().predict_frames);
  const double temperature = get_number(body, "temperature", 1.0, 0.0, 10.0);
  Rng rng(request_seed(get_seed(body), "/api/rnn/generate"));
  return ok(animation(model, chor::rnn_generate(model, to_model_space(model, prompt), steps, rng, temperature)));
}

Response Service::dataset_frames(const std::string& name, const std::map<std::string, std::string>& query) const {
  const auto it = datasets_.find(name);
  if (it == datasets_.end()) return error_response(404, "name", "unknown dataset '" + name + "'");
  const auto& frames = it->second.frames;
  const std::size_t from = parse_query(query, "from", 0);
  if (from > frames.size()) bad("from", "beyond the last frame (" + std::to_string(frames.size()) + ")");
  const std::size_t count = parse_query(query, "count", std::min(frames.size() - from, kMaxDatasetSlice));
  if (count > kMaxDatasetSlice) bad("count", "at most " + std::to_string(kMaxDatasetSlice));
  const std::size_t end = std::min(frames.size(), from + count);
  const std::span<const data::Frame> slice(frames.data() + from, end - from);
  return ok(data::animation_to_json(slice, it->second.fps, name));
}

Response Service::index() const {
  if (!config_.static_dir.empty() && std::filesystem::exists(config_.static_dir / "index.html")) {
    return {200, read_file(config_.static_dir / "index.html"), "text/html"};
  }
  return {200, kPlaceholder, "text/html"};
}

struct HttpServer::Impl {
  explicit Impl(const Service& s) : service(s) {}
  const Service& service;
  httplib::Server server;
  int port = 0;
};

HttpServer::HttpServer(const Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto& server = impl_->server;
  const auto& config = service.config();
  server.set_payload_max_length(config.body_limit);
  if (!config.static_dir.empty()) server.set_mount_point("/", config.static_dir.string());
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    Request r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    const Response out = impl_->service.handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(".*", dispatch);
  server.Post(".*", dispatch);
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(json{{"error", {{"status", res.status}, {"message", "request rejected"}}}}.dump(),
                      "application/json");
    }
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  const auto& config = impl_->service.config();
  if (config.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(config.host);
  } else {
    impl_->port = impl_->server.bind_to_port(config.host, config.port) ? config.port : -1;
  }
  if (impl_->port < 0) throw IoError("cannot bind " + config.host + ":" + std::to_string(config.port));
  return impl_->port;
}

void HttpServer::listen_after_bind() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace chor::service
