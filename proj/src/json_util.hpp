#pragma once

// Field accessors that report the JSON path of whatever is wrong.

#include <json.hpp>

#include <string>
#include <vector>

#include "shadow/error.hpp"
#include "shadow/geom.hpp"

namespace shadow::detail {

using nlohmann::json;

inline const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) {
    throw SchemaError(path, "expected an object");
  }
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError(path + "." + key, "missing required field");
  }
  return *it;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) {
    throw SchemaError(path, "expected a number");
  }
  return v.get<double>();
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) {
    throw SchemaError(path, "expected a string");
  }
  return v.get<std::string>();
}

inline std::vector<double> as_numbers(const json& v, const std::string& path) {
  if (!v.is_array()) {
    throw SchemaError(path, "expected an array of numbers");
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline std::vector<double> as_numbers(const json& v, const std::string& path, std::size_t n) {
  auto out = as_numbers(v, path);
  if (out.size() != n) {
    throw SchemaError(path, "expected " + std::to_string(n) + " numbers, got " + std::to_string(out.size()));
  }
  return out;
}

inline Vec3 as_vec3(const json& v, const std::string& path) {
  const auto a = as_numbers(v, path, 3);
  return {a[0], a[1], a[2]};
}

/// Quaternions are stored [w, x, y, z] and must already be unit length.
inline Quat as_quat(const json& v, const std::string& path) {
  const auto a = as_numbers(v, path, 4);
  const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3]);
  if (!(std::abs(n - 1.0) <= 1e-9)) {
    throw SchemaError(path, "quaternion is not unit norm");
  }
  return Quat::from_unit(a[0], a[1], a[2], a[3]);
}

inline json to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
inline json to_json(const Quat& q) { return json::array({q.w, q.x, q.y, q.z}); }

inline json parse_document(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("invalid ") + what + " JSON: " + e.what());
  }
}

}  // namespace shadow::detail
