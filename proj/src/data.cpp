#include "tce/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tce/errors.hpp"

namespace tce {

namespace fs = std::filesystem;

void SyntheticSpec::validate() const {
  if (num_classes < 1 || num_classes > 4) {
    throw std::invalid_argument("SyntheticSpec: num_classes must be in 1..4");
  }
  if (videos_per_class < 1) throw std::invalid_argument("SyntheticSpec: videos_per_class >= 1");
  if (frames_per_video < 6) {
    throw std::invalid_argument("SyntheticSpec: frames_per_video must be >= 6");
  }
  if (image_size < 8) throw std::invalid_argument("SyntheticSpec: image_size must be >= 8");
  if (noise_sigma < 0) throw std::invalid_argument("SyntheticSpec: noise_sigma must be >= 0");
}

VideoParams draw_video_params(const SyntheticSpec& spec, int cls, Rng& rng) {
  const double s = spec.image_size;
  VideoParams p;
  p.motion = static_cast<MotionClass>(cls % 4);
  p.shape = static_cast<ShapeKind>(rng.uniform_int(3));
  p.shape_radius = s * (0.11 + 0.05 * rng.uniform());
  // bright foreground: random chroma scaled so the peak channel is near 1
  float base[3];
  float peak = 0.0f;
  for (float& c : base) {
    c = 0.35f + 0.65f * float(rng.uniform());
    peak = std::max(peak, c);
  }
  const float gain = (0.85f + 0.15f * float(rng.uniform())) / peak;
  for (int c = 0; c < 3; ++c) p.color[c] = base[c] * gain;

  const double mid = (s - 1.0) / 2.0;
  const double margin = p.shape_radius + 1.5;
  const double reach = std::max(2.0, mid - margin);  // how far the center may wander
  const int steps = spec.frames_per_video - 1;
  const double jit = 0.06 * s;

  switch (p.motion) {
    case MotionClass::LinearDrift: {
      const double angle = rng.uniform() * 2.0 * M_PI;
      // span the whole reachable segment, capped by the smoothness budget
      double speed = 2.0 * reach / double(steps);
      speed = std::min(speed, 0.8 * kMaxStepPx);
      speed *= 0.8 + 0.2 * rng.uniform();
      p.vel_x = speed * std::cos(angle);
      p.vel_y = speed * std::sin(angle);
      p.center_x = mid - p.vel_x * steps / 2.0 + (rng.uniform() - 0.5) * jit;
      p.center_y = mid - p.vel_y * steps / 2.0 + (rng.uniform() - 0.5) * jit;
      break;
    }
    case MotionClass::CircularOrbit: {
      p.orbit_radius = reach * (0.75 + 0.2 * rng.uniform());
      p.center_x = mid + (rng.uniform() - 0.5) * jit * 0.5;
      p.center_y = mid + (rng.uniform() - 0.5) * jit * 0.5;
      const double om = 0.12 + 0.08 * rng.uniform();
      p.omega = std::min(om, kMaxStepPx * 0.85 / p.orbit_radius);
      if (rng.uniform() < 0.5) p.omega = -p.omega;
      p.phase = rng.uniform() * 2.0 * M_PI;
      break;
    }
    case MotionClass::Oscillation: {
      const double angle = rng.uniform() * 2.0 * M_PI;
      p.axis_x = std::cos(angle);
      p.axis_y = std::sin(angle);
      p.amplitude = reach * (0.55 + 0.25 * rng.uniform());
      const double om = 0.25 + 0.15 * rng.uniform();
      p.omega = std::min(om, kMaxStepPx * 0.85 / p.amplitude);
      p.phase = rng.uniform() * 2.0 * M_PI;
      p.center_x = mid + (rng.uniform() - 0.5) * jit * 0.5;
      p.center_y = mid + (rng.uniform() - 0.5) * jit * 0.5;
      break;
    }
    case MotionClass::Spiral: {
      p.spiral_r0 = 1.0 + rng.uniform();
      p.orbit_radius = reach * (0.85 + 0.12 * rng.uniform());  // final radius
      p.center_x = mid + (rng.uniform() - 0.5) * jit * 0.5;
      p.center_y = mid + (rng.uniform() - 0.5) * jit * 0.5;
      const double growth = (p.orbit_radius - p.spiral_r0) / double(steps);
      const double om = 0.28 + 0.12 * rng.uniform();
      // arc step at the widest point stays within the smoothness budget
      const double cap = std::sqrt(std::max(0.0, kMaxStepPx * kMaxStepPx * 0.72 - growth * growth));
      p.omega = std::min(om, cap / p.orbit_radius);
      if (rng.uniform() < 0.5) p.omega = -p.omega;
      p.phase = rng.uniform() * 2.0 * M_PI;
      break;
    }
  }
  return p;
}

std::vector<std::pair<double, double>> motion_path(const VideoParams& p, int frames) {
  std::vector<std::pair<double, double>> path;
  path.reserve(size_t(frames));
  const int steps = frames - 1;
  for (int t = 0; t < frames; ++t) {
    double x = p.center_x, y = p.center_y;
    switch (p.motion) {
      case MotionClass::LinearDrift:
        x += p.vel_x * t;
        y += p.vel_y * t;
        break;
      case MotionClass::CircularOrbit:
        x += p.orbit_radius * std::cos(p.phase + p.omega * t);
        y += p.orbit_radius * std::sin(p.phase + p.omega * t);
        break;
      case MotionClass::Oscillation: {
        const double off = p.amplitude * std::sin(p.phase + p.omega * t);
        x += p.axis_x * off;
        y += p.axis_y * off;
        break;
      }
      case MotionClass::Spiral: {
        const double r = p.spiral_r0 + (p.orbit_radius - p.spiral_r0) * double(t) / double(steps);
        x += r * std::cos(p.phase + p.omega * t);
        y += r * std::sin(p.phase + p.omega * t);
        break;
      }
    }
    path.push_back({x, y});
  }
  return path;
}

Image render_synthetic_frame(const VideoParams& p, int image_size, double cx, double cy) {
  Image img(image_size, image_size, 3);
  for (int y = 0; y < image_size; ++y) {
    for (int x = 0; x < image_size; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      double dist;  // signed distance to the shape boundary
      switch (p.shape) {
        case ShapeKind::Disc:
          dist = std::sqrt(dx * dx + dy * dy) - p.shape_radius;
          break;
        case ShapeKind::Square:
          dist = std::max(std::abs(dx), std::abs(dy)) - p.shape_radius;
          break;
        default:  // Diamond
          dist = (std::abs(dx) + std::abs(dy) - p.shape_radius) / std::sqrt(2.0);
          break;
      }
      const double alpha = std::clamp(0.5 - dist, 0.0, 1.0);  // 1px soft edge
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = float(p.background + alpha * (p.color[c] - p.background));
      }
    }
  }
  return img;
}

DatasetIndex generate_synthetic(const SyntheticSpec& spec, const fs::path& out) {
  spec.validate();
  fs::create_directories(out);

  DatasetIndex index;
  index.root = out.string();

  char name[32];
  const int total = spec.num_classes * spec.videos_per_class;
  for (int vid = 0; vid < total; ++vid) {
    const int cls = vid / spec.videos_per_class;
    Rng rng = Rng::child(spec.seed, "video-params", uint64_t(vid));
    const VideoParams params = draw_video_params(spec, cls, rng);
    const auto path = motion_path(params, spec.frames_per_video);

    std::snprintf(name, sizeof(name), "video_%04d", vid);
    const fs::path vdir = out / name;
    fs::create_directories(vdir);

    Rng noise = Rng::child(spec.seed, "noise", uint64_t(vid));
    for (int t = 0; t < spec.frames_per_video; ++t) {
      Image frame = render_synthetic_frame(params, spec.image_size, path[t].first, path[t].second);
      if (spec.noise_sigma > 0) {
        for (float& v : frame.data) {
          v = std::clamp(v + float(spec.noise_sigma * noise.gaussian()), 0.0f, 1.0f);
        }
      }
      char fname[32];
      std::snprintf(fname, sizeof(fname), "frame_%05d.ppm", t);
      write_ppm(vdir / fname, frame);
    }
    index.videos.push_back({uint32_t(vid), spec.frames_per_video, name, cls});
  }

  std::ofstream manifest(out / "manifest.tsv");
  if (!manifest) throw LoadError("generate_synthetic: cannot write manifest");
  manifest << "video_dir\tlabel\tnum_frames\n";
  for (const auto& v : index.videos) {
    manifest << v.dir << '\t' << v.label << '\t' << v.length << '\n';
  }
  if (!manifest) throw LoadError("generate_synthetic: manifest write failed");
  return index;
}

DatasetIndex load_dataset(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.tsv";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw LoadError("load_dataset: missing manifest: " + manifest_path.string());

  std::string line;
  if (!std::getline(manifest, line)) throw LoadError("load_dataset: empty manifest");
  if (line != "video_dir\tlabel\tnum_frames") {
    throw LoadError("load_dataset: unexpected manifest header: '" + line + "'");
  }

  struct Row {
    std::string dir;
    int label;
    int frames;
  };
  std::vector<Row> rows;
  size_t lineno = 1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Row row;
    std::string label_s, frames_s;
    if (!std::getline(ss, row.dir, '\t') || !std::getline(ss, label_s, '\t') ||
        !std::getline(ss, frames_s)) {
      throw LoadError("load_dataset: malformed manifest row " + std::to_string(lineno));
    }
    try {
      row.label = std::stoi(label_s);
      row.frames = std::stoi(frames_s);
    } catch (const std::exception&) {
      throw LoadError("load_dataset: non-numeric field in manifest row " + std::to_string(lineno));
    }
    if (row.frames < 2) {
      throw LoadError("load_dataset: video '" + row.dir + "' has " + std::to_string(row.frames) +
                      " frame(s); need at least 2");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw LoadError("load_dataset: manifest lists no videos");
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.dir < b.dir; });

  DatasetIndex index;
  index.root = root.string();
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    int h0 = -1, w0 = -1;
    for (int t = 0; t < row.frames; ++t) {
      char fname[32];
      std::snprintf(fname, sizeof(fname), "frame_%05d.ppm", t);
      const fs::path fpath = root / row.dir / fname;
      if (!fs::exists(fpath)) {
        throw LoadError("load_dataset: missing frame file: " + fpath.string());
      }
      int h = 0, w = 0;
      read_ppm_header(fpath, h, w);
      if (t == 0) {
        h0 = h;
        w0 = w;
      } else if (h != h0 || w != w0) {
        throw LoadError("load_dataset: inconsistent frame size in video '" + row.dir + "' at " +
                        fpath.string());
      }
    }
    index.videos.push_back({uint32_t(i), row.frames, row.dir, row.label});
  }
  index.validate();
  return index;
}

const std::vector<Image>& VideoStore::video(uint32_t video_id) const {
  if (video_id >= index_->videos.size()) {
    throw std::invalid_argument("VideoStore: video id out of range");
  }
  auto& slot = cache_[video_id];
  if (slot.empty()) {
    const VideoInfo& info = index_->videos[video_id];
    slot.reserve(size_t(info.length));
    for (int t = 0; t < info.length; ++t) {
      char fname[32];
      std::snprintf(fname, sizeof(fname), "frame_%05d.ppm", t);
      slot.push_back(read_ppm(fs::path(index_->root) / info.dir / fname));
    }
  }
  return slot;
}

const Image& VideoStore::frame(FrameRef ref) const {
  const auto& v = video(ref.video);
  if (ref.frame >= v.size()) throw std::invalid_argument("VideoStore: frame index out of range");
  return v[ref.frame];
}

std::pair<std::vector<uint32_t>, std::vector<uint32_t>> stratified_split(const DatasetIndex& index,
                                                                         double heldout_fraction,
                                                                         uint64_t seed) {
  if (heldout_fraction < 0.0 || heldout_fraction >= 1.0) {
    throw std::invalid_argument("stratified_split: fraction must be in [0, 1)");
  }
  std::map<int, std::vector<uint32_t>> by_class;
  for (const auto& v : index.videos) by_class[index.has_labels() ? v.label : 0].push_back(v.id);

  Rng rng(seed);
  std::vector<uint32_t> kept, held;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    size_t take = size_t(std::llround(heldout_fraction * double(members.size())));
    take = std::min(take, members.size() - 1);  // at least one video stays kept
    for (size_t i = 0; i < members.size(); ++i) {
      (i < take ? held : kept).push_back(members[i]);
    }
  }
  std::sort(kept.begin(), kept.end());
  std::sort(held.begin(), held.end());
  return {kept, held};
}

void AugmentationConfig::validate() const {
  if (flip_prob < 0 || flip_prob > 1 || grey_prob < 0 || grey_prob > 1) {
    throw std::invalid_argument("AugmentationConfig: probabilities must be in [0, 1]");
  }
  if (crop_padding < 0) throw std::invalid_argument("AugmentationConfig: padding must be >= 0");
  if (crop_size < 0) throw std::invalid_argument("AugmentationConfig: crop size must be >= 0");
  if (brightness < 0 || contrast < 0 || saturation < 0) {
    throw std::invalid_argument("AugmentationConfig: jitter strengths must be >= 0");
  }
}

Image augment(const Image& frame, const AugmentationConfig& config, Rng& rng) {
  config.validate();
  Image img = frame;

  if (config.crop_enabled) {
    const int crop = config.crop_size > 0 ? config.crop_size : std::min(frame.height, frame.width);
    if (crop > frame.height || crop > frame.width) {
      throw std::invalid_argument("augment: crop " + std::to_string(crop) +
                                  " larger than frame " + std::to_string(frame.height) + "x" +
                                  std::to_string(frame.width));
    }
    const int pad = config.crop_padding;
    const int max_dy = frame.height + 2 * pad - crop;
    const int max_dx = frame.width + 2 * pad - crop;
    const int dy = int(rng.uniform_int(uint64_t(max_dy) + 1));
    const int dx = int(rng.uniform_int(uint64_t(max_dx) + 1));
    Image cropped(crop, crop, img.channels);
    for (int y = 0; y < crop; ++y) {
      const int sy = y + dy - pad;
      if (sy < 0 || sy >= img.height) continue;  // zero padding
      for (int x = 0; x < crop; ++x) {
        const int sx = x + dx - pad;
        if (sx < 0 || sx >= img.width) continue;
        for (int c = 0; c < img.channels; ++c) cropped.at(y, x, c) = img.at(sy, sx, c);
      }
    }
    img = std::move(cropped);
  }

  if (config.flip_enabled && rng.uniform() < config.flip_prob) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width / 2; ++x) {
        for (int c = 0; c < img.channels; ++c) {
          std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
        }
      }
    }
  }

  if (config.grey_enabled && rng.uniform() < config.grey_prob) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const float l = luminance(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2));
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = l;
      }
    }
  }

  if (config.jitter_enabled) {
    const float fb = float(1.0 + config.brightness * (2.0 * rng.uniform() - 1.0));
    const float fc = float(1.0 + config.contrast * (2.0 * rng.uniform() - 1.0));
    const float fsat = float(1.0 + config.saturation * (2.0 * rng.uniform() - 1.0));
    // mean luminance after the brightness factor, for the contrast pivot
    double mean = 0.0;
    for (size_t i = 0; i + 2 < img.data.size(); i += 3) {
      mean += luminance(img.data[i] * fb, img.data[i + 1] * fb, img.data[i + 2] * fb);
    }
    mean /= double(img.pixel_count());
    for (size_t i = 0; i + 2 < img.data.size(); i += 3) {
      float r = img.data[i] * fb, g = img.data[i + 1] * fb, b = img.data[i + 2] * fb;
      r = (r - float(mean)) * fc + float(mean);
      g = (g - float(mean)) * fc + float(mean);
      b = (b - float(mean)) * fc + float(mean);
      const float l = luminance(r, g, b);
      img.data[i] = l + (r - l) * fsat;
      img.data[i + 1] = l + (g - l) * fsat;
      img.data[i + 2] = l + (b - l) * fsat;
    }
  }

  for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

}  // namespace tce
