#pragma once

#include <string>

#include "adec/error.hpp"
#include "json.hpp"

// Small helpers for schema-checked reads that report the offending path.
namespace adec::json_util {

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(child(path, key), "missing required field");
  return *it;
}

inline std::string require_string(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_string()) throw ParseError(child(path, key), "expected a string");
  return v.get<std::string>();
}

inline std::string optional_string(const nlohmann::json& j, const std::string& key, const std::string& path,
                                   const std::string& fallback = {}) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_string()) throw ParseError(child(path, key), "expected a string");
  return it->get<std::string>();
}

inline bool optional_bool(const nlohmann::json& j, const std::string& key, const std::string& path, bool fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw ParseError(child(path, key), "expected a boolean");
  return it->get<bool>();
}

inline long long optional_int(const nlohmann::json& j, const std::string& key, const std::string& path,
                              long long fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer()) throw ParseError(child(path, key), "expected an integer");
  return it->get<long long>();
}

inline const nlohmann::json& require_array(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const auto& v = require(j, key, path);
  if (!v.is_array()) throw ParseError(child(path, key), "expected an array");
  return v;
}

inline void require_schema(const nlohmann::json& doc, const std::string& expected) {
  if (!doc.is_object()) throw ParseError("", "document must be a JSON object");
  auto it = doc.find("schema");
  if (it == doc.end()) throw ParseError("/schema", "missing required field");
  if (!it->is_string() || it->get<std::string>() != expected) {
    throw ParseError("/schema", "expected \"" + expected + "\"");
  }
}

}  // namespace adec::json_util
