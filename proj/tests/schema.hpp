#pragma once

#include <cmath>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace schema {

/// Checks an animation document: {version: 1, fps > 0, vertex_count: 53,
/// frames: [[[x, y, z] x 53] ...], name?: string} and nothing else.
inline ::testing::AssertionResult animation(const nlohmann::json& doc) {
  auto fail = [](const std::string& why) { return ::testing::AssertionFailure() << why; };
  if (!doc.is_object()) return fail("not an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "version" && key != "fps" && key != "vertex_count" && key != "frames" && key != "name") {
      return fail("unexpected key " + key);
    }
  }
  if (doc.value("version", 0) != 1) return fail("version");
  if (!doc.contains("fps") || !doc["fps"].is_number() || !(doc["fps"].get<double>() > 0.0)) return fail("fps");
  if (!doc.contains("vertex_count") || doc["vertex_count"] != 53) return fail("vertex_count");
  if (doc.contains("name") && !doc["name"].is_string()) return fail("name");
  if (!doc.contains("frames") || !doc["frames"].is_array()) return fail("frames");
  for (const auto& frame : doc["frames"]) {
    if (!frame.is_array() || frame.size() != 53) return fail("frame arity");
    for (const auto& v : frame) {
      if (!v.is_array() || v.size() != 3) return fail("vertex arity");
      for (const auto& c : v) {
        if (!c.is_number() || !std::isfinite(c.get<double>())) return fail("coordinate");
      }
    }
  }
  return ::testing::AssertionSuccess();
}

/// {version: 1, latent_dim > 0, fps, points: [[latent_dim numbers] ...]}
inline ::testing::AssertionResult trajectory(const nlohmann::json& doc) {
  auto fail = [](const std::string& why) { return ::testing::AssertionFailure() << why; };
  if (!doc.is_object() || doc.value("version", 0) != 1) return fail("version");
  if (!doc.contains("latent_dim") || !doc["latent_dim"].is_number_unsigned()) return fail("latent_dim");
  const auto d = doc["latent_dim"].get<std::size_t>();
  if (!doc.contains("fps") || !doc["fps"].is_number()) return fail("fps");
  if (!doc.contains("points") || !doc["points"].is_array()) return fail("points");
  for (const auto& p : doc["points"]) {
    if (!p.is_array() || p.size() != d) return fail("point arity");
    for (const auto& c : p) {
      if (!c.is_number() || !std::isfinite(c.get<double>())) return fail("coordinate");
    }
  }
  return ::testing::AssertionSuccess();
}

/// {error: {status, message, field?}}
inline ::testing::AssertionResult error(const nlohmann::json& doc, int status) {
  if (!doc.is_object() || !doc.contains("error")) return ::testing::AssertionFailure() << "no error object";
  const auto& e = doc["error"];
  if (e.value("status", 0) != status) return ::testing::AssertionFailure() << "status " << e.dump();
  if (!e.contains("message") || !e["message"].is_string()) return ::testing::AssertionFailure() << "message";
  return ::testing::AssertionSuccess();
}

}  // namespace schema
