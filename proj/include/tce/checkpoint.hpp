#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace tce {

// Container file for trained state: "TCE" magic plus a version byte, a
// length-prefixed UTF-8 JSON header (config snapshot and the named-array
// directory with shapes/offsets), the raw float32 little-endian payloads and
// a trailing 64-bit FNV-1a checksum of all preceding bytes.

struct NamedArray {
  std::vector<uint32_t> shape;
  std::vector<float> data;

  size_t elements() const {
    size_t n = 1;
    for (uint32_t d : shape) n *= d;
    return n;
  }
};

struct Checkpoint {
  nlohmann::json meta;                       // config snapshot, epoch, seeds, ...
  std::map<std::string, NamedArray> arrays;  // sorted by name on disk
};

inline constexpr char kCheckpointVersion = '1';

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws VersionError for an unknown version byte, ChecksumError for
// truncation or corruption, CheckpointError for anything else malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tce
