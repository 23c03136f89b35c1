#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

namespace scenequal {

struct BackboneConfig {
  std::array<int, 4> stage_channels{32, 64, 128, 256};
  // Representation dimension D; also the transformer width.
  int repr_dim = 256;
  int transformer_layers = 4;
  int attention_heads = 4;
  // Feed-forward width inside each transformer layer, as a multiple of D.
  int ff_multiplier = 2;
  int projector_hidden = 256;
  int projector_out = 128;
  // Positional-encoding capacity (maximum views per clip).
  int max_views = 64;

  void validate() const;
  bool operator==(const BackboneConfig&) const = default;

  // Names of fields whose values differ, formatted as "field: a != b".
  std::vector<std::string> differences(const BackboneConfig& other) const;
};

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);

}  // namespace scenequal
