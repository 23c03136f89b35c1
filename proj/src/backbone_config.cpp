#include "scenequal/backbone_config.hpp"

#include "scenequal/error.hpp"
#include "scenequal/json_util.hpp"

using nlohmann::json;

namespace scenequal {

void BackboneConfig::validate() const {
  for (int c : stage_channels) {
    if (c < 1) throw ConfigError("backbone.stage_channels must be positive");
  }
  if (repr_dim < 1) throw ConfigError("backbone.repr_dim must be positive");
  if (attention_heads < 1 || repr_dim % attention_heads != 0) {
    throw ConfigError("backbone.repr_dim must be divisible by backbone.attention_heads");
  }
  if (transformer_layers < 0) throw ConfigError("backbone.transformer_layers must be >= 0");
  if (ff_multiplier < 1) throw ConfigError("backbone.ff_multiplier must be >= 1");
  if (projector_hidden < 1 || projector_out < 1) {
    throw ConfigError("backbone projector sizes must be positive");
  }
  if (max_views < 1) throw ConfigError("backbone.max_views must be >= 1");
}

std::vector<std::string> BackboneConfig::differences(const BackboneConfig& other) const {
  const json a = *this;
  const json b = other;
  std::vector<std::string> out;
  for (const auto& [key, value] : a.items()) {
    if (value != b.at(key)) out.push_back("backbone." + key + ": " + value.dump() + " != " + b.at(key).dump());
  }
  return out;
}

void to_json(json& j, const BackboneConfig& c) {
  j = json{{"stage_channels", c.stage_channels},
           {"repr_dim", c.repr_dim},
           {"transformer_layers", c.transformer_layers},
           {"attention_heads", c.attention_heads},
           {"ff_multiplier", c.ff_multiplier},
           {"projector_hidden", c.projector_hidden},
           {"projector_out", c.projector_out},
           {"max_views", c.max_views}};
}

void from_json(const json& j, BackboneConfig& c) {
  check_keys(j, {"stage_channels", "repr_dim", "transformer_layers", "attention_heads", "ff_multiplier",
                 "projector_hidden", "projector_out", "max_views"},
             "backbone");
  c.stage_channels = j.value("stage_channels", c.stage_channels);
  c.repr_dim = j.value("repr_dim", c.repr_dim);
  c.transformer_layers = j.value("transformer_layers", c.transformer_layers);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.ff_multiplier = j.value("ff_multiplier", c.ff_multiplier);
  c.projector_hidden = j.value("projector_hidden", c.projector_hidden);
  c.projector_out = j.value("projector_out", c.projector_out);
  c.max_views = j.value("max_views", c.max_views);
}

}  // namespace scenequal
