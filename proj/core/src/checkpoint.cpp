#include "chor/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "chor/data/io.hpp"

namespace chor::store {

using nlohmann::json;

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUnrecognizedFormat: return "unrecognized format";
    case ErrorKind::kUnsupportedVersion: return "unsupported version";
    case ErrorKind::kTruncated: return "truncated payload";
    case ErrorKind::kTrailingBytes: return "trailing bytes";
    case ErrorKind::kMalformedManifest: return "malformed manifest";
    case ErrorKind::kShapeMismatch: return "shape mismatch";
    case ErrorKind::kKindMismatch: return "kind mismatch";
  }
  return "checkpoint error";
}

double quantize(double value) { return static_cast<double>(static_cast<float>(value)); }

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

[[noreturn]] void fail(ErrorKind kind, const std::string& what) { throw CheckpointError(kind, what); }

}  // namespace

std::string encode(const Checkpoint& checkpoint) {
  json manifest = checkpoint.manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["kind"] = checkpoint.kind;
  json table = json::array();
  std::size_t payload = 0;
  for (const auto& t : checkpoint.tensors) {
    table.push_back({{"name", t.name}, {"shape", t.value.shape()}});
    payload += 4 * t.value.size();
  }
  manifest["tensors"] = std::move(table);
  const std::string text = manifest.dump();

  std::string out;
  out.reserve(kMagic.size() + 8 + text.size() + payload);
  out.append(kMagic);
  put_u64(out, text.size());
  out.append(text);
  for (const auto& t : checkpoint.tensors) {
    for (double v : t.value.data()) {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) throw NumericError("checkpoint: tensor '" + t.name + "' holds a value outside f32 range");
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

Checkpoint decode(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    fail(ErrorKind::kUnrecognizedFormat, "missing CHOR1 magic");
  }
  const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t pos = kMagic.size();
  if (bytes.size() < pos + 8) fail(ErrorKind::kTruncated, "file ends inside the manifest length");
  const std::uint64_t length = get_u64(base + pos);
  pos += 8;
  if (length > bytes.size() - pos) fail(ErrorKind::kTruncated, "file ends inside the manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(pos, length));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kMalformedManifest, e.what());
  }
  pos += length;
  if (!manifest.is_object()) fail(ErrorKind::kMalformedManifest, "manifest is not an object");
  if (!manifest.contains("format_version") || !manifest["format_version"].is_number_integer()) {
    fail(ErrorKind::kMalformedManifest, "missing format_version");
  }
  if (manifest["format_version"].get<long long>() != kFormatVersion) {
    fail(ErrorKind::kUnsupportedVersion,
         "format_version " + manifest["format_version"].dump() + " (supported: " + std::to_string(kFormatVersion) + ")");
  }
  if (!manifest.contains("kind") || !manifest["kind"].is_string()) fail(ErrorKind::kMalformedManifest, "missing kind");
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    fail(ErrorKind::kMalformedManifest, "missing tensor table");
  }

  Checkpoint checkpoint;
  checkpoint.kind = manifest["kind"].get<std::string>();
  for (const json& entry : manifest["tensors"]) {
    if (!entry.is_object() || !entry.contains("name") || !entry["name"].is_string() || !entry.contains("shape") ||
        !entry["shape"].is_array() || entry["shape"].empty()) {
      fail(ErrorKind::kMalformedManifest, "tensor table entry " + entry.dump());
    }
    Shape shape;
    for (const json& d : entry["shape"]) {
      if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) {
        fail(ErrorKind::kMalformedManifest, "tensor '" + entry["name"].get<std::string>() + "' has a bad shape");
      }
      shape.push_back(d.get<std::size_t>());
    }
    const std::size_t count = shape_size(shape);
    if (count > (bytes.size() - pos) / 4) {
      fail(ErrorKind::kTruncated, "payload of tensor '" + entry["name"].get<std::string>() + "' is incomplete");
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i, pos += 4) values[i] = std::bit_cast<float>(get_u32(base + pos));
    checkpoint.tensors.push_back({entry["name"].get<std::string>(), Tensor(shape, std::move(values))});
  }
  if (pos != bytes.size()) {
    fail(ErrorKind::kTrailingBytes, std::to_string(bytes.size() - pos) + " bytes after the last tensor");
  }
  manifest.erase("format_version");
  manifest.erase("kind");
  manifest.erase("tensors");
  checkpoint.manifest = std::move(manifest);
  return checkpoint;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  data::write_text_file(path, encode(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode(data::read_text_file(path)); }

json to_json(const data::NormalizationParams& norm) {
  return {{"centering", norm.centering == data::Centering::kGlobal ? "global" : "per_frame"},
          {"offset", norm.offset},
          {"scale", norm.scale}};
}

data::NormalizationParams normalization_from_json(const json& doc) {
  data::NormalizationParams norm;
  try {
    const std::string centering = doc.at("centering").get<std::string>();
    if (centering == "global") {
      norm.centering = data::Centering::kGlobal;
    } else if (centering == "per_frame") {
      norm.centering = data::Centering::kPerFrame;
    } else {
      fail(ErrorKind::kMalformedManifest, "normalization.centering '" + centering + "'");
    }
    for (std::size_t a = 0; a < 3; ++a) norm.offset[a] = doc.at("offset").at(a).get<double>();
    norm.scale = doc.at("scale").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kMalformedManifest, std::string("normalization: ") + e.what());
  }
  return norm;
}

namespace {

json training_json(const TrainingRecord& record) {
  return {{"config", record.config}, {"seed", record.seed}, {"epoch", record.epoch}, {"metrics", record.metrics}};
}

json common_manifest(const json& architecture, const data::NormalizationParams& norm, double fps,
                     const TrainingRecord& record) {
  json m = training_json(record);
  m["training"] = m["config"];
  m.erase("config");
  m["architecture"] = architecture;
  m["normalization"] = to_json(norm);
  m["data"] = {{"fps", fps}};
  return m;
}

void require_kind(const Checkpoint& c, std::string_view kind) {
  if (c.kind != kind) fail(ErrorKind::kKindMismatch, "expected a " + std::string(kind) + " checkpoint, found " + c.kind);
}

const json& field(const json& doc, const char* key) {
  if (!doc.contains(key)) fail(ErrorKind::kMalformedManifest, std::string("missing '") + key + "'");
  return doc[key];
}

template <typename Model>
void restore_common(Model& model, const Checkpoint& c) {
  try {
    model.norm = normalization_from_json(field(c.manifest, "normalization"));
    model.fps = field(c.manifest, "data").at("fps").template get<double>();
    model.record.config = field(c.manifest, "training");
    model.record.seed = field(c.manifest, "seed").template get<std::uint64_t>();
    model.record.epoch = field(c.manifest, "epoch").template get<std::size_t>();
    model.record.metrics = field(c.manifest, "metrics");
  } catch (const json::exception& e) {
    fail(ErrorKind::kMalformedManifest, e.what());
  }
}

template <typename Model>
void assign_parameters(Model& model, const std::vector<NamedTensor>& tensors) {
  try {
    model.parameters().assign(tensors);
  } catch (const Error& e) {
    fail(ErrorKind::kShapeMismatch, e.what());
  }
}

template <typename Config, typename F>
Config architecture(const Checkpoint& c, F parse) {
  try {
    return parse(field(c.manifest, "architecture"));
  } catch (const json::exception& e) {
    fail(ErrorKind::kMalformedManifest, std::string("architecture: ") + e.what());
  }
}

void append_pca(std::vector<NamedTensor>& tensors, const PcaModel& pca) {
  tensors.push_back({"pca.mean", Tensor::vector(pca.mean)});
  tensors.push_back({"pca.components", pca.components});
  tensors.push_back({"pca.explained_variance", Tensor::vector(pca.explained_variance)});
  tensors.push_back({"pca.explained_variance_ratio", Tensor::vector(pca.explained_variance_ratio)});
}

const Tensor& tensor_named(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  fail(ErrorKind::kShapeMismatch, "missing tensor '" + name + "'");
}

PcaModel extract_pca(const std::vector<NamedTensor>& tensors, double discarded) {
  PcaModel pca;
  pca.mean = tensor_named(tensors, "pca.mean").to_vector();
  pca.components = tensor_named(tensors, "pca.components");
  pca.explained_variance = tensor_named(tensors, "pca.explained_variance").to_vector();
  pca.explained_variance_ratio = tensor_named(tensors, "pca.explained_variance_ratio").to_vector();
  pca.discarded_variance = discarded;
  const std::size_t k = pca.explained_variance.size();
  if (pca.components.rank() != 2 || pca.components.dim(0) != k || pca.components.dim(1) != pca.mean.size() ||
      pca.explained_variance_ratio.size() != k) {
    fail(ErrorKind::kShapeMismatch, "pca tensors disagree: components " + shape_string(pca.components.shape()) +
                                        ", mean " + std::to_string(pca.mean.size()) + ", k " + std::to_string(k));
  }
  return pca;
}

std::vector<NamedTensor> without_pca(const std::vector<NamedTensor>& tensors) {
  std::vector<NamedTensor> out;
  for (const auto& t : tensors) {
    if (!t.name.starts_with("pca.")) out.push_back(t);
  }
  return out;
}

}  // namespace

Checkpoint to_checkpoint(const PoseAutoencoder& model) {
  return {std::string(kPoseAe), common_manifest(to_json(model.config()), model.norm, model.fps, model.record),
          model.parameters().named()};
}

Checkpoint to_checkpoint(const SequenceVae& model) {
  return {std::string(kSeqVae), common_manifest(to_json(model.config()), model.norm, model.fps, model.record),
          model.parameters().named()};
}

Checkpoint to_checkpoint(const SeqRnn& model) {
  Checkpoint c{std::string(kSeqRnn), common_manifest(to_json(model.config()), model.norm, model.fps, model.record),
               model.parameters().named()};
  c.manifest["pca"] = model.pca() ? json{{"discarded_variance", model.pca()->discarded_variance}} : json(nullptr);
  if (model.pca()) append_pca(c.tensors, *model.pca());
  return c;
}

Checkpoint to_checkpoint(const PcaModel& model) {
  Checkpoint c{std::string(kPca), {{"discarded_variance", model.discarded_variance}}, {}};
  append_pca(c.tensors, model);
  return c;
}

PoseAutoencoder pose_ae_from_checkpoint(const Checkpoint& c) {
  require_kind(c, kPoseAe);
  Rng rng(0);
  PoseAutoencoder model(architecture<PoseAeConfig>(c, pose_ae_config_from_json), rng);
  assign_parameters(model, c.tensors);
  restore_common(model, c);
  return model;
}

SequenceVae seq_vae_from_checkpoint(const Checkpoint& c) {
  require_kind(c, kSeqVae);
  Rng rng(0);
  SequenceVae model(architecture<SeqVaeConfig>(c, seq_vae_config_from_json), rng);
  assign_parameters(model, c.tensors);
  restore_common(model, c);
  return model;
}

SeqRnn seq_rnn_from_checkpoint(const Checkpoint& c) {
  require_kind(c, kSeqRnn);
  std::optional<PcaModel> pca;
  const json& pca_doc = field(c.manifest, "pca");
  if (!pca_doc.is_null()) {
    if (!pca_doc.is_object() || !pca_doc.contains("discarded_variance")) {
      fail(ErrorKind::kMalformedManifest, "pca entry");
    }
    pca = extract_pca(c.tensors, pca_doc["discarded_variance"].get<double>());
  }
  Rng rng(0);
  SeqRnn model(architecture<SeqRnnConfig>(c, seq_rnn_config_from_json), std::move(pca), rng);
  assign_parameters(model, without_pca(c.tensors));
  restore_common(model, c);
  return model;
}

PcaModel pca_from_checkpoint(const Checkpoint& c) {
  require_kind(c, kPca);
  const json& d = field(c.manifest, "discarded_variance");
  if (!d.is_number()) fail(ErrorKind::kMalformedManifest, "discarded_variance");
  return extract_pca(c.tensors, d.get<double>());
}

PoseAutoencoder load_pose_ae(const std::filesystem::path& path) { return pose_ae_from_checkpoint(load_checkpoint(path)); }
SequenceVae load_seq_vae(const std::filesystem::path& path) { return seq_vae_from_checkpoint(load_checkpoint(path)); }
SeqRnn load_seq_rnn(const std::filesystem::path& path) { return seq_rnn_from_checkpoint(load_checkpoint(path)); }
PcaModel load_pca(const std::filesystem::path& path) { return pca_from_checkpoint(load_checkpoint(path)); }

AnyModel load_any(const std::filesystem::path& path) {
  const Checkpoint c = load_checkpoint(path);
  if (c.kind == kPoseAe) return pose_ae_from_checkpoint(c);
  if (c.kind == kSeqVae) return seq_vae_from_checkpoint(c);
  if (c.kind == kSeqRnn) return seq_rnn_from_checkpoint(c);
  fail(ErrorKind::kKindMismatch, "'" + path.string() + "' holds a " + c.kind + " checkpoint, not a model");
}

std::string kind_of(const AnyModel& model) {
  switch (model.index()) {
    case 0: return std::string(kPoseAe);
    case 1: return std::string(kSeqVae);
    default: return std::string(kSeqRnn);
  }
}

}  // namespace chor::store
