#pragma once

#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "sharpseg/error.hpp"

namespace sharpseg {

/// Reads fields of a JSON object, remembering which keys were consumed;
/// finish() rejects anything left over. All failures are InvalidConfig
/// naming the dotted field path.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::InvalidConfig, where() + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) fail(ErrorCode::InvalidConfig, field(key) + " is required");
    return convert<T>(key);
  }

  /// Nested object (or nullptr when absent).
  const nlohmann::json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail(ErrorCode::InvalidConfig, "unknown field " + field(item.key()));
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  template <class T>
  T convert(const std::string& key) const {
    const auto& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(ErrorCode::InvalidConfig, field(key) + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) {
        fail(ErrorCode::InvalidConfig, field(key) + " must be a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(ErrorCode::InvalidConfig, field(key) + " must be a number");
    } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
      if (!v.is_array()) fail(ErrorCode::InvalidConfig, field(key) + " must be an array");
      for (const auto& e : v) {
        if (!e.is_number_integer() || e.get<long long>() < 0) {
          fail(ErrorCode::InvalidConfig, field(key) + " entries must be non-negative integers");
        }
      }
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(ErrorCode::InvalidConfig, field(key) + " must be a string");
    }
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidConfig, field(key) + ": " + e.what());
    }
  }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace sharpseg
