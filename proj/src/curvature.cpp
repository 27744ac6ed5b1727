#include "tce/curvature.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "tce/errors.hpp"
#include "tce/rng.hpp"

namespace tce {

namespace {

struct TurnStats {
  double total = 0.0;
  double max_turn = 0.0;
  bool skipped = false;
};

TurnStats turn_angles(const Trajectory& traj) {
  const auto& pts = traj.points;
  if (pts.size() < 3) {
    throw std::invalid_argument("curvature: trajectory needs >= 3 points, got " +
                                std::to_string(pts.size()));
  }
  const size_t dim = pts[0].size();
  for (const auto& p : pts) {
    if (p.size() != dim) throw std::invalid_argument("curvature: inconsistent point dimension");
  }

  // segment d_i = p_{i+1} - p_i, with norms
  std::vector<Vec> seg(pts.size() - 1);
  std::vector<double> seg_norm(pts.size() - 1);
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    seg[i].resize(dim);
    double n2 = 0.0;
    for (size_t d = 0; d < dim; ++d) {
      seg[i][d] = pts[i + 1][d] - pts[i][d];
      n2 += seg[i][d] * seg[i][d];
    }
    seg_norm[i] = std::sqrt(n2);
  }

  TurnStats st;
  for (size_t i = 0; i + 1 < seg.size(); ++i) {
    if (seg_norm[i] <= kSegmentEpsilon || seg_norm[i + 1] <= kSegmentEpsilon) {
      st.skipped = true;  // zero-length segment: this turn contributes 0
      continue;
    }
    double dot = 0.0;
    for (size_t d = 0; d < dim; ++d) dot += seg[i][d] * seg[i + 1][d];
    const double c = std::clamp(dot / (seg_norm[i] * seg_norm[i + 1]), -1.0, 1.0);
    const double angle = std::acos(c);
    st.total += angle;
    st.max_turn = std::max(st.max_turn, angle);
  }
  return st;
}

}  // namespace

CurvatureValue tac(const Trajectory& traj) {
  const TurnStats st = turn_angles(traj);
  return {st.total, st.skipped};
}

CurvatureValue mac(const Trajectory& traj) {
  const TurnStats st = turn_angles(traj);
  return {st.max_turn, st.skipped};
}

CoherencyReport coherency_report(const EmbedFn& encoder, const std::vector<LabeledVideo>& videos,
                                 int sample_count, uint64_t seed) {
  if (videos.empty()) throw std::invalid_argument("coherency_report: no videos");
  if (sample_count < 1) throw std::invalid_argument("coherency_report: sample_count must be >= 1");
  for (const auto& v : videos) {
    if (v.sequence == nullptr || v.sequence->length() < 3) {
      throw std::invalid_argument("coherency_report: every video needs >= 3 frames");
    }
  }

  const bool labeled =
      std::all_of(videos.begin(), videos.end(), [](const LabeledVideo& v) { return v.label >= 0; });

  Rng rng(seed);
  std::vector<size_t> chosen;
  const size_t want = std::min<size_t>(size_t(sample_count), videos.size());
  if (want == videos.size()) {
    for (size_t i = 0; i < videos.size(); ++i) chosen.push_back(i);
  } else if (!labeled) {
    chosen = rng.sample_without_replacement(videos.size(), want);
  } else {
    // spread the budget across classes as evenly as possible, uniform within
    std::map<int, std::vector<size_t>> by_class;
    for (size_t i = 0; i < videos.size(); ++i) by_class[videos[i].label].push_back(i);
    const size_t classes = by_class.size();
    size_t remaining = want;
    size_t index = 0;
    for (auto& [label, members] : by_class) {
      const size_t classes_left = classes - index;
      const size_t quota = std::min(members.size(), (remaining + classes_left - 1) / classes_left);
      const auto picks = rng.sample_without_replacement(members.size(), quota);
      for (size_t p : picks) chosen.push_back(members[p]);
      remaining -= quota;
      ++index;
    }
    // leftover (some classes too small): fill from unchosen videos uniformly
    if (remaining > 0) {
      std::vector<size_t> rest;
      for (size_t i = 0; i < videos.size(); ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) rest.push_back(i);
      }
      const auto picks = rng.sample_without_replacement(rest.size(), remaining);
      for (size_t p : picks) chosen.push_back(rest[p]);
    }
    std::sort(chosen.begin(), chosen.end());
  }

  CoherencyReport rep;
  for (size_t i : chosen) {
    const auto& vid = videos[i];
    Trajectory traj;
    traj.points.reserve(vid.sequence->frames.size());
    for (const auto& frame : vid.sequence->frames) traj.points.push_back(encoder(frame));
    const CurvatureValue t = tac(traj);
    const CurvatureValue m = mac(traj);
    rep.per_video.push_back({vid.id, vid.sequence->length(), t.radians, m.radians});
    rep.skipped_segments = rep.skipped_segments || t.skipped_segments;
    rep.mean_tac += t.radians;
    rep.mean_mac += m.radians;
  }
  rep.mean_tac /= double(rep.per_video.size());
  rep.mean_mac /= double(rep.per_video.size());
  return rep;
}

void write_coherency_report(const CoherencyReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw LoadError("coherency report: cannot open " + path.string());
  out << "video_id\tframes\ttac\tmac\n";
  char buf[64];
  const auto fmt = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  for (const auto& row : report.per_video) {
    out << row.video_id << '\t' << row.frames << '\t' << fmt(row.tac) << '\t' << fmt(row.mac)
        << '\n';
  }
  if (!out) throw LoadError("coherency report: write failed " + path.string());
}

}  // namespace tce
