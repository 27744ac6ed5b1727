#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "tce/core.hpp"
#include "tce/rng.hpp"

namespace tce {

// ---------------------------------------------------------------------------
// Synthetic frame-sequence generator: one bright shape per video moving along
// a class-determined smooth path over a dark background.
// ---------------------------------------------------------------------------

enum class MotionClass { LinearDrift = 0, CircularOrbit = 1, Oscillation = 2, Spiral = 3 };
enum class ShapeKind { Disc = 0, Square = 1, Diamond = 2 };

struct SyntheticSpec {
  int num_classes = 4;       // motion patterns, in MotionClass order
  int videos_per_class = 10;
  int frames_per_video = 30;
  int image_size = 32;       // H = W
  double noise_sigma = 0.01; // per-pixel Gaussian, applied after rendering
  uint64_t seed = 0;

  void validate() const;
};

// Shape-center displacement per frame never exceeds this (pixels); the
// parameter draws below enforce it, and tests measure it on rendered output.
constexpr double kMaxStepPx = 1.6;

// Per-video appearance and motion parameters, drawn once per video.
struct VideoParams {
  MotionClass motion = MotionClass::LinearDrift;
  ShapeKind shape = ShapeKind::Disc;
  double shape_radius = 4.0;
  float color[3] = {1.0f, 1.0f, 1.0f};
  float background = 0.05f;
  // motion parameters (meaning depends on motion class)
  double center_x = 0.0, center_y = 0.0;
  double vel_x = 0.0, vel_y = 0.0;       // linear drift
  double orbit_radius = 0.0;             // circular orbit + spiral end radius
  double omega = 0.0;                    // angular velocity (rad/frame)
  double phase = 0.0;
  double amplitude = 0.0;                // oscillation
  double axis_x = 1.0, axis_y = 0.0;     // oscillation direction
  double spiral_r0 = 0.0;                // spiral start radius
};

VideoParams draw_video_params(const SyntheticSpec& spec, int cls, Rng& rng);

// Shape-center coordinates for each frame. Pure function of the parameters.
std::vector<std::pair<double, double>> motion_path(const VideoParams& params, int frames);

// Renders the shape at the given center. Pure: the generator's frame t is
// exactly render(params, path[t]) plus noise.
Image render_synthetic_frame(const VideoParams& params, int image_size, double cx, double cy);

// Writes <out>/manifest.tsv plus <out>/video_%04d/frame_%05d.ppm and returns
// the resulting index. Byte-identical output for identical spec and seed.
DatasetIndex generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out);

// ---------------------------------------------------------------------------
// On-disk datasets
// ---------------------------------------------------------------------------

// Reads manifest.tsv, validates every referenced frame file (existence and
// uniform per-video shape) and returns the index sorted by directory name.
DatasetIndex load_dataset(const std::filesystem::path& root);

// Lazy per-video frame cache over an on-disk dataset.
class VideoStore {
 public:
  explicit VideoStore(const DatasetIndex& index) : index_(&index), cache_(index.videos.size()) {}

  const Image& frame(FrameRef ref) const;
  const std::vector<Image>& video(uint32_t video_id) const;
  const DatasetIndex& index() const { return *index_; }

 private:
  const DatasetIndex* index_;
  mutable std::vector<std::vector<Image>> cache_;
};

// Seeded stratified split by video (per class when labels exist). Returns
// (kept, held_out) video ids; held-out gets round(fraction * per-class count),
// at least one video stays kept per class.
std::pair<std::vector<uint32_t>, std::vector<uint32_t>> stratified_split(const DatasetIndex& index,
                                                                         double heldout_fraction,
                                                                         uint64_t seed);

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

struct AugmentationConfig {
  bool crop_enabled = true;
  int crop_size = 0;      // 0 = frame size
  int crop_padding = 2;   // zero padding before the random crop
  bool flip_enabled = true;
  double flip_prob = 0.5;
  bool grey_enabled = true;
  double grey_prob = 0.2;
  bool jitter_enabled = true;
  double brightness = 0.4;  // factors drawn from [1 - s, 1 + s]
  double contrast = 0.4;
  double saturation = 0.4;

  void validate() const;
  bool any_enabled() const { return crop_enabled || flip_enabled || grey_enabled || jitter_enabled; }
};

inline float luminance(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

// Applies, in order: random crop, random horizontal flip, random greyscale,
// color jitter; output clamped to [0, 1]. Deterministic per rng state; draw
// order is fixed as crop(row, col), flip, grey, jitter(brightness, contrast,
// saturation), with disabled stages drawing nothing.
Image augment(const Image& frame, const AugmentationConfig& config, Rng& rng);

}  // namespace tce
