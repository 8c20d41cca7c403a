#pragma once

// Strict JSON field readers used by every configuration document.

#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>

#include "json.hpp"

#include "esvit/error.hpp"

namespace esvit::jsonutil {

using nlohmann::json;

inline void expect_object(const json& obj, const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::kInvalidConfig, where + ": expected a JSON object");
}

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& where) {
  expect_object(obj, where);
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (std::string_view a : allowed) known = known || key == a;
    if (!known) fail(ErrorKind::kInvalidConfig, where + ": unknown key '" + key + "'");
  }
}

// Leaves `out` untouched when the key is absent.
template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!it->is_number_integer() || (!it->is_number_unsigned() && it->template get<long long>() < 0)) {
      fail(ErrorKind::kInvalidConfig, where + "." + key + ": expected a non-negative integer (" + it->dump() + ")");
    }
  }
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kInvalidConfig, where + "." + key + ": wrong type (" + it->dump() + ")");
  }
}

}  // namespace esvit::jsonutil
