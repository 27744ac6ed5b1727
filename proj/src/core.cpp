#include "tce/core.hpp"

#include <algorithm>
#include <cmath>

namespace tce {

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na <= kNormEpsilon || nb <= kNormEpsilon) {
    throw DegenerateVectorError("cosine_similarity: zero-norm input");
  }
  double dot = 0.0;
  for (size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

Vec normalize(std::span<const double> v) {
  const double n = l2_norm(v);
  if (n <= kNormEpsilon) {
    throw DegenerateVectorError("normalize: vector norm " + std::to_string(n) +
                                " below 1e-12, direction undefined");
  }
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

Embedding::Embedding(Vec v) : values(std::move(v)) {
  if (values.size() < 2) throw std::invalid_argument("Embedding: dimension must be >= 2");
  const double n = l2_norm(values);
  if (std::abs(n - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("Embedding: norm " + std::to_string(n) + " is not unit within 1e-5");
  }
}

void VideoSequence::validate() const {
  if (frames.size() < 2) throw std::invalid_argument("VideoSequence: need at least 2 frames");
  for (const auto& f : frames) {
    if (!f.same_shape(frames.front())) {
      throw std::invalid_argument("VideoSequence: frames differ in shape");
    }
  }
}

bool DatasetIndex::has_labels() const {
  return !videos.empty() &&
         std::all_of(videos.begin(), videos.end(), [](const VideoInfo& v) { return v.label >= 0; });
}

int DatasetIndex::num_classes() const {
  int m = -1;
  for (const auto& v : videos) m = std::max(m, v.label);
  return m + 1;
}

void DatasetIndex::validate() const {
  for (size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].id != i) {
      throw std::invalid_argument("DatasetIndex: video ids must be contiguous from 0");
    }
    if (videos[i].length < 2) {
      throw std::invalid_argument("DatasetIndex: video " + std::to_string(i) +
                                  " has fewer than 2 frames");
    }
  }
}

std::vector<std::pair<FrameRef, FrameRef>> enumerate_anchor_pairs(const DatasetIndex& index,
                                                                  AnchorMode mode,
                                                                  uint64_t rng_seed) {
  index.validate();
  std::vector<std::pair<FrameRef, FrameRef>> pairs;
  if (mode == AnchorMode::EveryFrame) {
    pairs.reserve(index.total_frames());
    for (const auto& v : index.videos) {
      for (uint32_t t = 0; t + 1 < uint32_t(v.length); ++t) {
        pairs.push_back({FrameRef{v.id, t}, FrameRef{v.id, t + 1}});
      }
    }
  } else {
    Rng rng(rng_seed);
    pairs.reserve(index.videos.size());
    for (const auto& v : index.videos) {
      const auto t = static_cast<uint32_t>(rng.uniform_int(uint64_t(v.length) - 1));
      pairs.push_back({FrameRef{v.id, t}, FrameRef{v.id, t + 1}});
    }
  }
  return pairs;
}

const char* to_string(AnchorMode mode) {
  return mode == AnchorMode::EveryFrame ? "every-frame" : "one-per-video";
}

AnchorMode anchor_mode_from_string(const std::string& s) {
  if (s == "every-frame") return AnchorMode::EveryFrame;
  if (s == "one-per-video") return AnchorMode::OnePerVideo;
  throw std::invalid_argument("unknown anchor mode: " + s + " (expected every-frame|one-per-video)");
}

}  // namespace tce
