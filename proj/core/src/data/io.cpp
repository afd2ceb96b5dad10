#include "chor/data/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace chor::data {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

json animation_to_json(std::span<const Frame> frames, double fps, const std::string& name) {
  json doc;
  doc["version"] = 1;
  doc["fps"] = fps;
  doc["vertex_count"] = kVertexCount;
  json list = json::array();
  for (const Frame& f : frames) {
    json vertices = json::array();
    for (std::size_t v = 0; v < kVertexCount; ++v) {
      vertices.push_back({f.coords[3 * v], f.coords[3 * v + 1], f.coords[3 * v + 2]});
    }
    list.push_back(std::move(vertices));
  }
  doc["frames"] = std::move(list);
  if (!name.empty()) doc["name"] = name;
  return doc;
}

namespace {

double number_at(const json& value, const std::string& where) {
  if (!value.is_number()) throw FormatError(where + ": expected a number");
  const double v = value.get<double>();
  if (!std::isfinite(v)) throw FormatError(where + ": non-finite value");
  return v;
}

}  // namespace

Animation animation_from_json(const json& doc) {
  if (!doc.is_object()) throw FormatError("animation: document must be an object");
  if (!doc.contains("version") || doc["version"] != 1) throw FormatError("animation: unsupported or missing version");
  if (!doc.contains("fps")) throw FormatError("animation: missing fps");
  Animation anim;
  anim.fps = number_at(doc["fps"], "animation.fps");
  if (!(anim.fps > 0.0)) throw FormatError("animation.fps: must be positive");
  if (!doc.contains("vertex_count") || !doc["vertex_count"].is_number_integer() ||
      doc["vertex_count"].get<long long>() != static_cast<long long>(kVertexCount)) {
    throw FormatError("animation.vertex_count: must be 53");
  }
  if (!doc.contains("frames") || !doc["frames"].is_array()) throw FormatError("animation.frames: must be an array");
  if (doc.contains("name") && doc["name"].is_string()) anim.name = doc["name"].get<std::string>();
  const json& frames = doc["frames"];
  anim.frames.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const std::string where = "animation.frames[" + std::to_string(k) + "]";
    const json& vertices = frames[k];
    if (!vertices.is_array() || vertices.size() != kVertexCount) throw FormatError(where + ": must hold 53 vertices");
    Frame f;
    for (std::size_t v = 0; v < kVertexCount; ++v) {
      const json& p = vertices[v];
      if (!p.is_array() || p.size() != 3) {
        throw FormatError(where + "[" + std::to_string(v) + "]: must be [x, y, z]");
      }
      for (std::size_t a = 0; a < 3; ++a) f.coords[3 * v + a] = number_at(p[a], where);
    }
    anim.frames.push_back(f);
  }
  return anim;
}

void export_animation(const std::filesystem::path& path, std::span<const Frame> frames, double fps,
                      const std::string& name) {
  write_text_file(path, animation_to_json(frames, fps, name).dump() + "\n");
}

Animation import_animation(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path.string() + "' is not a valid animation document: " + e.what());
  }
  return animation_from_json(doc);
}

namespace {

bool parse_double(std::string_view token, double& out) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) token.remove_suffix(1);
  if (token.empty()) return false;
  const auto result = std::from_chars(token.data(), token.data() + token.size(), out);
  return result.ec == std::errc() && result.ptr == token.data() + token.size();
}

}  // namespace

std::vector<Frame> frames_from_csv(const std::string& text) {
  std::vector<Frame> frames;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string_view> tokens;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      tokens.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    double first = 0.0;
    if (frames.empty() && line_no == 1 && !parse_double(tokens.front(), first)) continue;  // header
    if (tokens.size() != kFrameDim) {
      throw FormatError("csv line " + std::to_string(line_no) + ": expected 159 columns, got " +
                        std::to_string(tokens.size()));
    }
    Frame f;
    for (std::size_t i = 0; i < kFrameDim; ++i) {
      if (!parse_double(tokens[i], f.coords[i]) || !std::isfinite(f.coords[i])) {
        throw FormatError("csv line " + std::to_string(line_no) + ", column " + std::to_string(i + 1) +
                          ": not a finite number");
      }
    }
    frames.push_back(f);
  }
  return frames;
}

std::string frames_to_csv(std::span<const Frame> frames) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t v = 0; v < kVertexCount; ++v) {
    out << (v ? "," : "") << 'v' << v << "x,v" << v << "y,v" << v << 'z';
  }
  out << '\n';
  for (const Frame& f : frames) {
    for (std::size_t i = 0; i < kFrameDim; ++i) out << (i ? "," : "") << f.coords[i];
    out << '\n';
  }
  return out.str();
}

MotionDataset load_dataset(const std::filesystem::path& path, std::optional<double> fps) {
  MotionDataset ds;
  ds.name = path.stem().string();
  if (path.extension() == ".csv") {
    ds.frames = frames_from_csv(read_text_file(path));
    ds.fps = fps.value_or(kDefaultFps);
  } else {
    Animation anim = import_animation(path);
    ds.frames = std::move(anim.frames);
    ds.fps = fps.value_or(anim.fps);
    if (!anim.name.empty()) ds.name = anim.name;
  }
  if (!(ds.fps > 0.0)) throw FormatError("dataset fps must be positive");
  return ds;
}

json trajectory_to_json(const LatentTrajectory& traj) {
  json doc;
  doc["version"] = 1;
  doc["latent_dim"] = traj.latent_dim;
  doc["fps"] = traj.fps;
  json points = json::array();
  for (const auto& p : traj.points) points.push_back(p);
  doc["points"] = std::move(points);
  return doc;
}

LatentTrajectory trajectory_from_json(const json& doc) {
  if (!doc.is_object()) throw FormatError("trajectory: document must be an object");
  if (!doc.contains("version") || doc["version"] != 1) throw FormatError("trajectory: unsupported or missing version");
  if (!doc.contains("latent_dim") || !doc["latent_dim"].is_number_unsigned()) {
    throw FormatError("trajectory.latent_dim: must be a positive integer");
  }
  LatentTrajectory traj;
  traj.latent_dim = doc["latent_dim"].get<std::size_t>();
  if (doc.contains("fps")) traj.fps = number_at(doc["fps"], "trajectory.fps");
  if (!doc.contains("points") || !doc["points"].is_array()) throw FormatError("trajectory.points: must be an array");
  for (std::size_t k = 0; k < doc["points"].size(); ++k) {
    const json& p = doc["points"][k];
    const std::string where = "trajectory.points[" + std::to_string(k) + "]";
    if (!p.is_array() || p.size() != traj.latent_dim) throw FormatError(where + ": must hold latent_dim numbers");
    std::vector<double> point;
    for (const json& v : p) point.push_back(number_at(v, where));
    traj.points.push_back(std::move(point));
  }
  return traj;
}

}  // namespace chor::data
