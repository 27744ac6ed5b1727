#include "tce/memory_bank.hpp"

#include <cmath>
#include <stdexcept>

#include "tce/errors.hpp"

namespace tce {

const char* to_string(BankMode mode) {
  return mode == BankMode::PerFrame ? "per-frame" : "per-video";
}

BankMode bank_mode_from_string(const std::string& s) {
  if (s == "per-frame") return BankMode::PerFrame;
  if (s == "per-video") return BankMode::PerVideo;
  throw std::invalid_argument("unknown bank mode: " + s + " (expected per-frame|per-video)");
}

namespace {

std::vector<BankKey> keys_for(const std::vector<int>& video_lengths, BankMode mode) {
  std::vector<BankKey> keys;
  for (uint32_t v = 0; v < video_lengths.size(); ++v) {
    if (mode == BankMode::PerVideo) {
      keys.push_back({v, 0});
    } else {
      for (uint32_t f = 0; f < uint32_t(video_lengths[v]); ++f) keys.push_back({v, f});
    }
  }
  return keys;
}

}  // namespace

MemoryBank MemoryBank::init(const DatasetIndex& index, int dim, BankMode mode, uint64_t seed,
                            double update_rate) {
  if (dim < 2) throw std::invalid_argument("MemoryBank: dim must be >= 2");
  if (update_rate <= 0.0 || update_rate > 1.0) {
    throw std::invalid_argument("MemoryBank: update rate must be in (0, 1]");
  }
  index.validate();
  std::vector<int> lengths;
  lengths.reserve(index.videos.size());
  for (const auto& v : index.videos) lengths.push_back(v.length);

  MemoryBank bank;
  bank.mode_ = mode;
  bank.dim_ = dim;
  bank.update_rate_ = update_rate;
  bank.keys_ = keys_for(lengths, mode);
  bank.data_.resize(bank.keys_.size() * size_t(dim));

  Rng rng(seed);
  Vec draw(size_t(dim), 0.0);
  for (size_t row = 0; row < bank.keys_.size(); ++row) {
    for (auto& x : draw) x = rng.gaussian();
    const Vec unit = normalize(draw);
    for (int d = 0; d < dim; ++d) bank.data_[row * size_t(dim) + d] = static_cast<float>(unit[d]);
  }
  bank.build_position_map();
  return bank;
}

MemoryBank MemoryBank::restore(const std::vector<int>& video_lengths, int dim, BankMode mode,
                               double update_rate, std::vector<float> rows) {
  MemoryBank bank;
  bank.mode_ = mode;
  bank.dim_ = dim;
  bank.update_rate_ = update_rate;
  bank.keys_ = keys_for(video_lengths, mode);
  if (rows.size() != bank.keys_.size() * size_t(dim)) {
    throw std::invalid_argument("MemoryBank::restore: row payload size mismatch");
  }
  bank.data_ = std::move(rows);
  bank.build_position_map();
  return bank;
}

void MemoryBank::build_position_map() {
  pos_.clear();
  per_video_count_.clear();
  pos_.reserve(keys_.size() * 2);
  for (size_t i = 0; i < keys_.size(); ++i) {
    pos_.emplace(keys_[i].packed(), i);
    ++per_video_count_[keys_[i].video];
  }
}

size_t MemoryBank::row_of(BankKey key) const {
  const auto it = pos_.find(key.packed());
  if (it == pos_.end()) {
    throw KeyError("MemoryBank: no entry for video " + std::to_string(key.video) + " frame " +
                   std::to_string(key.frame));
  }
  return it->second;
}

Vec MemoryBank::entry_as_vec(BankKey key) const {
  const auto e = entry(key);
  return Vec(e.begin(), e.end());
}

void MemoryBank::update(BankKey key, std::span<const float> embedding) {
  const size_t row = row_of(key);
  if (static_cast<int>(embedding.size()) != dim_) {
    throw std::invalid_argument("MemoryBank::update: dimension mismatch");
  }
  float* dst = data_.data() + row * size_t(dim_);
  if (update_rate_ == 1.0) {
    // direct replacement, bit-identical to the input
    std::copy(embedding.begin(), embedding.end(), dst);
    return;
  }
  Vec blended(size_t(dim_), 0.0);
  for (int d = 0; d < dim_; ++d) {
    blended[d] = (1.0 - update_rate_) * double(dst[d]) + update_rate_ * double(embedding[d]);
  }
  const Vec unit = normalize(blended);
  for (int d = 0; d < dim_; ++d) dst[d] = static_cast<float>(unit[d]);
}

size_t MemoryBank::eligible_count(uint32_t exclude_video) const {
  const auto it = per_video_count_.find(exclude_video);
  const size_t excluded = it == per_video_count_.end() ? 0 : it->second;
  return keys_.size() - excluded;
}

std::vector<BankKey> MemoryBank::sample_uniform_negatives(uint32_t exclude_video, size_t n,
                                                          Rng& rng) const {
  std::vector<size_t> eligible;
  eligible.reserve(keys_.size());
  for (size_t i = 0; i < keys_.size(); ++i) {
    if (keys_[i].video != exclude_video) eligible.push_back(i);
  }
  if (eligible.size() < n) {
    throw InsufficientNegativesError("sample_uniform_negatives: requested " + std::to_string(n) +
                                     " but only " + std::to_string(eligible.size()) +
                                     " entries outside video " + std::to_string(exclude_video));
  }
  const auto picks = rng.sample_without_replacement(eligible.size(), n);
  std::vector<BankKey> out;
  out.reserve(n);
  for (size_t p : picks) out.push_back(keys_[eligible[p]]);
  return out;
}

}  // namespace tce
