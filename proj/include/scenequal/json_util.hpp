#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "scenequal/error.hpp"

namespace scenequal {

// Throws ConfigError naming the first key of `j` not in `allowed`.
inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view section) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) {
      throw ConfigError("unknown config key '" + (section.empty() ? "" : std::string(section) + ".") + key + "'");
    }
  }
}

}  // namespace scenequal
