#include "scenequal/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "scenequal/error.hpp"

using nlohmann::json;

namespace scenequal {
namespace {

constexpr char kMagic[8] = {'S', 'C', 'N', 'Q', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

const TensorRecord* CheckpointData::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const TensorRecord& CheckpointData::at(std::string_view name) const {
  if (const auto* t = find(name)) return *t;
  throw FormatError("checkpoint has no tensor '" + std::string(name) + "'");
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_all(path)); }

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  std::string payload;
  json table = json::array();
  for (const auto& t : data.tensors) {
    std::int64_t numel = 1;
    for (auto d : t.shape) numel *= d;
    if (numel != static_cast<std::int64_t>(t.data.size())) {
      throw Error("tensor '" + t.name + "' shape does not match its data");
    }
    table.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", payload.size()}, {"numel", numel}});
    payload.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }
  json header = data.meta;
  header["format_version"] = kCheckpointFormatVersion;
  header["tensors"] = table;
  header["payload_sha256"] = sha256_hex(payload);
  const std::string header_text = header.dump();
  const std::uint64_t header_len = header_text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) throw Error("checkpoint write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const std::string where = "checkpoint " + path.string();
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(where + ": bad magic");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, sizeof(header_len));
  if (header_len > bytes.size() - 16) throw FormatError(where + ": truncated header");
  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw FormatError(where + ": unreadable header: " + e.what());
  }
  const std::string_view payload(bytes.data() + 16 + header_len, bytes.size() - 16 - header_len);

  CheckpointData data;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatError(where + ": unsupported format_version " + std::to_string(version));
    }
    if (header.at("payload_sha256").get<std::string>() != sha256_hex(payload)) {
      throw FormatError(where + ": payload digest mismatch (corrupted file)");
    }
    for (const auto& entry : header.at("tensors")) {
      TensorRecord t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto numel = entry.at("numel").get<std::uint64_t>();
      if (offset + numel * sizeof(float) > payload.size()) {
        throw FormatError(where + ": tensor '" + t.name + "' exceeds payload");
      }
      t.data.resize(numel);
      std::memcpy(t.data.data(), payload.data() + offset, numel * sizeof(float));
      data.tensors.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw FormatError(where + ": malformed header: " + e.what());
  }
  header.erase("tensors");
  header.erase("payload_sha256");
  data.meta = std::move(header);
  return data;
}

}  // namespace scenequal
