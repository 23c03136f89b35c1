#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace scenequal {

inline constexpr int kCheckpointFormatVersion = 1;

// A float32 tensor stored by canonical name.
struct TensorRecord {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

// Self-describing archive:
//   8 bytes  magic "SCNQCKPT"
//   8 bytes  little-endian header length L
//   L bytes  UTF-8 JSON header: metadata plus a tensor table
//            {name, shape, offset, numel} and the payload's SHA-256
//   payload  concatenated little-endian float32 tensors
struct CheckpointData {
  nlohmann::json meta;
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(std::string_view name) const;
  const TensorRecord& at(std::string_view name) const;
};

// Writes to a temporary sibling and renames it into place.
void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);

// Validates magic, header, tensor table and payload digest before returning.
CheckpointData read_checkpoint(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace scenequal
