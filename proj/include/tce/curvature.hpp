#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "tce/core.hpp"

namespace tce {

// Discretely sampled curve in embedding space. Points are raw vectors;
// unit norm is not required.
struct Trajectory {
  std::vector<Vec> points;
};

constexpr double kSegmentEpsilon = 1e-9;

struct CurvatureValue {
  double radians = 0.0;
  // set when a zero-length segment forced a turn to be skipped (counted as 0)
  bool skipped_segments = false;
};

// Total absolute curvature: sum over interior points of the unsigned turn
// angle between consecutive difference vectors, each cosine clamped to
// [-1, 1] before arccos. Throws std::invalid_argument for < 3 points.
CurvatureValue tac(const Trajectory& traj);

// Maximum absolute curvature: the largest single turn angle.
CurvatureValue mac(const Trajectory& traj);

// Per-video coherency summary of encoder trajectories.
struct CoherencyRow {
  uint32_t video_id = 0;
  int frames = 0;
  double tac = 0.0;
  double mac = 0.0;
};

struct CoherencyReport {
  double mean_tac = 0.0;
  double mean_mac = 0.0;
  bool skipped_segments = false;
  std::vector<CoherencyRow> per_video;
};

// A video eligible for the coherency report (id + optional label + frames).
struct LabeledVideo {
  uint32_t id = 0;
  int label = -1;
  const VideoSequence* sequence = nullptr;
};

using EmbedFn = std::function<Vec(const Image&)>;

// Embeds every frame of up to sample_count videos and reports per-video and
// mean TAC/MAC. When labels exist the sample is spread as evenly as possible
// across classes (uniform within class, seeded); otherwise it is drawn
// uniformly from the list. Videos need >= 3 frames.
CoherencyReport coherency_report(const EmbedFn& encoder, const std::vector<LabeledVideo>& videos,
                                 int sample_count, uint64_t seed);

// One row per video: video_id <TAB> frames <TAB> tac <TAB> mac.
void write_coherency_report(const CoherencyReport& report, const std::filesystem::path& path);

}  // namespace tce
