#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "adapt/error.hpp"

namespace adapt::fields {

using nlohmann::json;

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
}

/// Rejects keys outside `known`.
inline void known_keys(const json& j, const std::string& path, std::initializer_list<const char*> known) {
    require_object(j, path);
    std::set<std::string> k(known.begin(), known.end());
    for (const auto& [key, _] : j.items())
        if (!k.count(key)) throw ConfigError(path.empty() ? key : path + "." + key, "unknown field");
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

/// `v` converted to T, or a ConfigError at `p`.
template <typename T>
T as(const json& v, const std::string& p) {
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(p, "expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(p, "expected an integer");
        if constexpr (std::is_unsigned_v<T>)
            if (!v.is_number_unsigned()) throw ConfigError(p, "expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(p, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(p, "expected a string");
    }
    try {
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(p, e.what());
    }
}

template <typename T>
T read(const json& j, const std::string& path, const char* key) {
    const std::string p = join(path, key);
    if (!j.contains(key)) throw ConfigError(p, "missing field");
    return as<T>(j.at(key), p);
}

template <typename T>
T read_or(const json& j, const std::string& path, const char* key, T fallback) {
    return j.contains(key) ? read<T>(j, path, key) : fallback;
}

template <typename T>
std::vector<T> read_list(const json& j, const std::string& path, const char* key) {
    const std::string p = join(path, key);
    if (!j.contains(key)) throw ConfigError(p, "missing field");
    const auto& v = j.at(key);
    if (!v.is_array()) throw ConfigError(p, "expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as<T>(v[i], p + "[" + std::to_string(i) + "]"));
    return out;
}

}  // namespace adapt::fields
