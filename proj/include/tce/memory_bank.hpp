#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tce/core.hpp"
#include "tce/rng.hpp"

namespace tce {

enum class BankMode { PerFrame, PerVideo };

const char* to_string(BankMode mode);
BankMode bank_mode_from_string(const std::string& s);

// Key of a bank entry. PerVideo banks use frame = 0.
struct BankKey {
  uint32_t video = 0;
  uint32_t frame = 0;
  friend auto operator<=>(const BankKey&, const BankKey&) = default;
  uint64_t packed() const { return (uint64_t(video) << 32) | frame; }
};

// Keyed store of the most recent embedding per frame (or per video), read by
// the losses and by negative mining without re-embedding any frame.
//
// Rows are float32 so that bank state round-trips bit-exactly through
// checkpoints. Update math runs in double and rounds once on store.
//
// Concurrency: single writer, multiple readers per training step. All reads
// for a batch must complete before update() is called for that batch; the
// trainer enforces this ordering and tests assert it.
class MemoryBank {
 public:
  MemoryBank() = default;

  // Entries are independent random unit vectors (normalized Gaussian draws),
  // deterministic under the seed.
  static MemoryBank init(const DatasetIndex& index, int dim, BankMode mode, uint64_t seed,
                         double update_rate = 1.0);

  // Rebuild from serialized state (video_lengths describe the index the bank
  // was created from; ignored in PerVideo mode except for the count).
  static MemoryBank restore(const std::vector<int>& video_lengths, int dim, BankMode mode,
                            double update_rate, std::vector<float> rows);

  size_t size() const { return keys_.size(); }
  int dim() const { return dim_; }
  BankMode mode() const { return mode_; }
  double update_rate() const { return update_rate_; }
  const std::vector<BankKey>& keys() const { return keys_; }
  const std::vector<float>& rows() const { return data_; }

  bool contains(BankKey key) const { return pos_.count(key.packed()) != 0; }
  size_t row_of(BankKey key) const;  // throws KeyError
  std::span<const float> entry(size_t row) const {
    return {data_.data() + row * size_t(dim_), size_t(dim_)};
  }
  std::span<const float> entry(BankKey key) const { return entry(row_of(key)); }
  Vec entry_as_vec(BankKey key) const;

  // entry <- normalize((1 - rate) * old + rate * embedding). rate = 1 stores
  // the input bit-identically (the blend path is bypassed).
  void update(BankKey key, std::span<const float> embedding);

  // N keys uniform without replacement among entries with video != exclude_video.
  // Throws InsufficientNegativesError when fewer than n are eligible.
  std::vector<BankKey> sample_uniform_negatives(uint32_t exclude_video, size_t n, Rng& rng) const;

  // Number of entries not belonging to the given video.
  size_t eligible_count(uint32_t exclude_video) const;

 private:
  BankMode mode_ = BankMode::PerFrame;
  int dim_ = 0;
  double update_rate_ = 1.0;
  std::vector<BankKey> keys_;  // ascending
  std::vector<float> data_;    // size() x dim_
  std::unordered_map<uint64_t, size_t> pos_;
  std::unordered_map<uint32_t, size_t> per_video_count_;

  void build_position_map();
};

}  // namespace tce
