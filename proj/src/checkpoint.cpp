#include "tce/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "tce/errors.hpp"
#include "tce/rng.hpp"

namespace tce {

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

uint64_t get_u64(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  // directory: name -> shape + offset (in float elements from payload start)
  nlohmann::json dir = nlohmann::json::array();
  size_t offset = 0;
  for (const auto& [name, arr] : ckpt.arrays) {
    if (arr.elements() != arr.data.size()) {
      throw CheckpointError("save_checkpoint: array '" + name + "' shape/data mismatch");
    }
    dir.push_back({{"name", name}, {"shape", arr.shape}, {"offset", offset}});
    offset += arr.data.size();
  }
  nlohmann::json meta = ckpt.meta;
  meta["format_version"] = 1;
  meta["arrays"] = std::move(dir);
  const std::string meta_text = meta.dump();

  std::string bytes;
  bytes.reserve(8 + meta_text.size() + offset * 4 + 8);
  bytes += "TCE";
  bytes.push_back(kCheckpointVersion);
  put_u32(bytes, uint32_t(meta_text.size()));
  bytes += meta_text;
  for (const auto& [name, arr] : ckpt.arrays) {
    static_assert(sizeof(float) == 4);
    const size_t pos = bytes.size();
    bytes.resize(pos + arr.data.size() * 4);
    std::memcpy(bytes.data() + pos, arr.data.data(), arr.data.size() * 4);
  }
  put_u64(bytes, fnv1a64(bytes.data(), bytes.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("save_checkpoint: cannot open " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw CheckpointError("save_checkpoint: write failed " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("load_checkpoint: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 16 || bytes.compare(0, 3, "TCE") != 0) {
    throw CheckpointError("load_checkpoint: not a checkpoint file: " + path.string());
  }
  if (bytes[3] != kCheckpointVersion) {
    throw VersionError("load_checkpoint: unknown version byte '" + std::string(1, bytes[3]) +
                       "' in " + path.string());
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const uint64_t stored = get_u64(raw + bytes.size() - 8);
  const uint64_t actual = fnv1a64(bytes.data(), bytes.size() - 8);
  if (stored != actual) {
    throw ChecksumError("load_checkpoint: checksum mismatch (truncated or corrupted): " +
                        path.string());
  }

  const uint32_t meta_len = get_u32(raw + 4);
  if (8 + size_t(meta_len) + 8 > bytes.size()) {
    throw ChecksumError("load_checkpoint: header length exceeds file: " + path.string());
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(bytes.substr(8, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("load_checkpoint: bad metadata: " + std::string(e.what()));
  }

  const size_t payload_begin = 8 + meta_len;
  const size_t payload_bytes = bytes.size() - payload_begin - 8;
  if (payload_bytes % 4 != 0) {
    throw CheckpointError("load_checkpoint: payload not float-aligned: " + path.string());
  }

  Checkpoint ckpt;
  if (!meta.contains("arrays") || !meta["arrays"].is_array()) {
    throw CheckpointError("load_checkpoint: missing array directory");
  }
  for (const auto& entry : meta["arrays"]) {
    NamedArray arr;
    const std::string name = entry.at("name").get<std::string>();
    arr.shape = entry.at("shape").get<std::vector<uint32_t>>();
    const size_t offset = entry.at("offset").get<size_t>();
    const size_t count = arr.elements();
    if ((offset + count) * 4 > payload_bytes) {
      throw CheckpointError("load_checkpoint: array '" + name + "' out of payload bounds");
    }
    arr.data.resize(count);
    std::memcpy(arr.data.data(), bytes.data() + payload_begin + offset * 4, count * 4);
    ckpt.arrays.emplace(name, std::move(arr));
  }
  meta.erase("arrays");
  ckpt.meta = std::move(meta);
  return ckpt;
}

}  // namespace tce
