#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "chor/error.hpp"
#include "chor/params.hpp"
#include "chor/pca.hpp"
#include "chor/pose_ae.hpp"
#include "chor/seq_rnn.hpp"
#include "chor/seq_vae.hpp"

namespace chor::store {

inline constexpr std::string_view kMagic = "CHOR1";
inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kExtension = ".chor";

inline constexpr std::string_view kPoseAe = "pose_ae";
inline constexpr std::string_view kSeqVae = "seq_vae";
inline constexpr std::string_view kSeqRnn = "seq_rnn";
inline constexpr std::string_view kPca = "pca";

enum class ErrorKind {
  kUnrecognizedFormat,
  kUnsupportedVersion,
  kTruncated,
  kTrailingBytes,
  kMalformedManifest,
  kShapeMismatch,
  kKindMismatch,
};

const char* to_string(ErrorKind kind);

class CheckpointError : public Error {
 public:
  CheckpointError(ErrorKind kind, const std::string& what)
      : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Container: 5-byte magic, u64 little-endian manifest length, JSON manifest,
/// then each tensor's f32 little-endian payload in manifest order.
struct Checkpoint {
  std::string kind;
  /// Everything but format_version, kind and the tensor table.
  nlohmann::json manifest = nlohmann::json::object();
  std::vector<NamedTensor> tensors;
};

std::string encode(const Checkpoint& checkpoint);
Checkpoint decode(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Round-trips a value through f32.
double quantize(double value);

nlohmann::json to_json(const data::NormalizationParams& norm);
data::NormalizationParams normalization_from_json(const nlohmann::json& doc);

Checkpoint to_checkpoint(const PoseAutoencoder& model);
Checkpoint to_checkpoint(const SequenceVae& model);
Checkpoint to_checkpoint(const SeqRnn& model);
Checkpoint to_checkpoint(const PcaModel& model);

PoseAutoencoder pose_ae_from_checkpoint(const Checkpoint& checkpoint);
SequenceVae seq_vae_from_checkpoint(const Checkpoint& checkpoint);
SeqRnn seq_rnn_from_checkpoint(const Checkpoint& checkpoint);
PcaModel pca_from_checkpoint(const Checkpoint& checkpoint);

template <typename Model>
void save(const Model& model, const std::filesystem::path& path) {
  save_checkpoint(path, to_checkpoint(model));
}

PoseAutoencoder load_pose_ae(const std::filesystem::path& path);
SequenceVae load_seq_vae(const std::filesystem::path& path);
SeqRnn load_seq_rnn(const std::filesystem::path& path);
PcaModel load_pca(const std::filesystem::path& path);

using AnyModel = std::variant<PoseAutoencoder, SequenceVae, SeqRnn>;

/// Loads whichever model kind the file holds.
AnyModel load_any(const std::filesystem::path& path);
std::string kind_of(const AnyModel& model);

}  // namespace chor::store
