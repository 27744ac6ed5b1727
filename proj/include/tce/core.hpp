#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tce/errors.hpp"
#include "tce/image.hpp"
#include "tce/rng.hpp"

namespace tce {

using Vec = std::vector<double>;

constexpr double kNormEpsilon = 1e-12;    // below this a vector has no direction
constexpr double kUnitTolerance = 1e-5;   // embeddings must be unit within this

// Cosine similarity, clamped to [-1, 1] against rounding.
// Throws DegenerateVectorError on (near-)zero input.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// v / ||v||. Idempotent on unit inputs; throws DegenerateVectorError when
// ||v|| <= 1e-12.
Vec normalize(std::span<const double> v);

// Unit-norm embedding. Construction validates the invariant.
struct Embedding {
  Vec values;

  Embedding() = default;
  explicit Embedding(Vec v);
  static Embedding from_raw(std::span<const double> v) { return Embedding(normalize(v)); }

  size_t dim() const { return values.size(); }
};

// (video, frame) coordinates of one frame.
struct FrameRef {
  uint32_t video = 0;
  uint32_t frame = 0;
  friend auto operator<=>(const FrameRef&, const FrameRef&) = default;
};

// Ordered frames of a single video.
struct VideoSequence {
  std::vector<Image> frames;

  int length() const { return static_cast<int>(frames.size()); }
  // T >= 2, uniform frame shape.
  void validate() const;
};

// One row of the dataset index.
struct VideoInfo {
  uint32_t id = 0;
  int length = 0;
  std::string dir;     // directory name under the dataset root
  int label = -1;      // -1 when unlabeled
};

// Global enumeration of videos. ids are contiguous from 0, every T >= 2.
struct DatasetIndex {
  std::string root;
  std::vector<VideoInfo> videos;

  size_t total_frames() const {
    size_t n = 0;
    for (const auto& v : videos) n += size_t(v.length);
    return n;
  }
  bool has_labels() const;
  int num_classes() const;  // max label + 1, or 0 when unlabeled
  void validate() const;
};

enum class AnchorMode { EveryFrame, OnePerVideo };

// (anchor, positive) frame pairs with positive = anchor + 1.
// EveryFrame: frames 0..T-2 of each video, deterministic order.
// OnePerVideo: one uniform anchor per video, drawn from the seed.
std::vector<std::pair<FrameRef, FrameRef>> enumerate_anchor_pairs(const DatasetIndex& index,
                                                                  AnchorMode mode,
                                                                  uint64_t rng_seed);

const char* to_string(AnchorMode mode);
AnchorMode anchor_mode_from_string(const std::string& s);

}  // namespace tce
