#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tce/curvature.hpp"
#include "test_util.hpp"

using namespace tce;

namespace {

constexpr double kPi = 3.14159265358979323846;

Trajectory traj(std::initializer_list<Vec> pts) { return Trajectory{std::vector<Vec>(pts)}; }

// random orthogonal matrix via Gram-Schmidt on a Gaussian matrix
std::vector<Vec> random_rotation(Rng& rng, int dim) {
  std::vector<Vec> q;
  for (int i = 0; i < dim; ++i) {
    Vec v(size_t(dim), 0.0);
    for (auto& x : v) x = rng.gaussian();
    for (const auto& u : q) {
      double dot = 0.0;
      for (int d = 0; d < dim; ++d) dot += v[size_t(d)] * u[size_t(d)];
      for (int d = 0; d < dim; ++d) v[size_t(d)] -= dot * u[size_t(d)];
    }
    q.push_back(normalize(v));
  }
  return q;
}

Vec apply(const std::vector<Vec>& m, const Vec& v) {
  Vec out(v.size(), 0.0);
  for (size_t r = 0; r < m.size(); ++r) {
    for (size_t c = 0; c < v.size(); ++c) out[r] += m[r][c] * v[c];
  }
  return out;
}

}  // namespace

TEST_CASE("collinear trajectories have zero curvature") {
  const auto line = traj({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}});
  CHECK(tac(line).radians == 0.0);
  CHECK(mac(line).radians == 0.0);
  CHECK_FALSE(tac(line).skipped_segments);
}

TEST_CASE("right-angle turn") {
  const auto corner = traj({{0, 0}, {1, 0}, {1, 1}});
  CHECK(tac(corner).radians == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(mac(corner).radians == doctest::Approx(kPi / 2).epsilon(1e-12));
}

TEST_CASE("hexagon vertices") {
  Trajectory hex;
  for (int k = 0; k < 4; ++k) {
    hex.points.push_back({std::cos(k * kPi / 3), std::sin(k * kPi / 3)});
  }
  CHECK(tac(hex).radians == doctest::Approx(2 * kPi / 3).epsilon(1e-9));
  CHECK(mac(hex).radians == doctest::Approx(kPi / 3).epsilon(1e-9));
}

TEST_CASE("mac picks the largest of known turns") {
  // headings 0, then pi/6, then pi/6 + pi/2
  const double h1 = kPi / 6;
  const double h2 = kPi / 6 + kPi / 2;
  Trajectory t;
  t.points.push_back({0, 0});
  t.points.push_back({1, 0});
  t.points.push_back({1 + std::cos(h1), std::sin(h1)});
  t.points.push_back({1 + std::cos(h1) + std::cos(h2), std::sin(h1) + std::sin(h2)});
  CHECK(mac(t).radians == doctest::Approx(kPi / 2).epsilon(1e-9));
  CHECK(tac(t).radians == doctest::Approx(kPi / 6 + kPi / 2).epsilon(1e-9));
}

TEST_CASE("argument and degenerate-segment handling") {
  CHECK_THROWS_AS(tac(traj({{0, 0}, {1, 0}})), std::invalid_argument);
  // zero-length first segment: that turn is skipped and flagged
  const auto with_dup = traj({{1, 1}, {1, 1}, {2, 2}});
  CHECK(tac(with_dup).radians == 0.0);
  CHECK(tac(with_dup).skipped_segments);
  CHECK(mac(with_dup).skipped_segments);
  // the other turns still count
  const auto partial = traj({{0, 0}, {0, 0}, {1, 0}, {1, 1}});
  CHECK(partial.points.size() == 4);
  CHECK(tac(partial).radians == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(tac(partial).skipped_segments);
}

TEST_CASE("tac >= mac, angles within [0, pi], reversal invariance") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + int(rng.uniform_int(10));
    Trajectory t;
    for (int i = 0; i < n; ++i) t.points.push_back(testutil::random_scaled(rng, 5, 0.2, 3.0));
    const double total = tac(t).radians;
    const double peak = mac(t).radians;
    CHECK(total >= peak);
    CHECK(peak >= 0.0);
    CHECK(peak <= kPi + 1e-12);
    CHECK(total <= double(n - 2) * kPi + 1e-9);
    if (n == 3) CHECK(total == peak);

    Trajectory rev = t;
    std::reverse(rev.points.begin(), rev.points.end());
    CHECK(tac(rev).radians == doctest::Approx(total).epsilon(1e-9));
    CHECK(mac(rev).radians == doctest::Approx(peak).epsilon(1e-9));
  }
}

TEST_CASE("invariance under rotation, translation and positive scaling") {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 4;
    const int n = 4 + int(rng.uniform_int(6));
    Trajectory t;
    for (int i = 0; i < n; ++i) t.points.push_back(testutil::random_scaled(rng, dim, 0.2, 2.0));

    const auto rot = random_rotation(rng, dim);
    Vec shift(size_t(dim), 0.0);
    for (auto& x : shift) x = 3.0 * rng.gaussian();
    const double scale = 0.05 + 10.0 * rng.uniform();

    Trajectory moved;
    for (const auto& p : t.points) {
      Vec q = apply(rot, p);
      for (int d = 0; d < dim; ++d) q[size_t(d)] = scale * q[size_t(d)] + shift[size_t(d)];
      moved.points.push_back(std::move(q));
    }
    CHECK(std::abs(tac(moved).radians - tac(t).radians) <= 1e-9);
    CHECK(std::abs(mac(moved).radians - mac(t).radians) <= 1e-9);
  }
}

namespace {

// tiny frames whose first pixel carries an index the fake encoders key on
Image tagged_frame(float tag) {
  Image img(2, 2, 3);
  img.at(0, 0, 0) = tag;
  return img;
}

}  // namespace

TEST_CASE("coherency report on constructed trajectories") {
  // encoder sending frame k to (k, 0, ...) gives straight-line trajectories
  const EmbedFn line_embed = [](const Image& img) {
    return Vec{double(img.at(0, 0, 0)) * 100.0, 1.0};
  };
  std::vector<VideoSequence> seqs(3);
  for (int v = 0; v < 3; ++v) {
    for (int k = 0; k < 5; ++k) seqs[size_t(v)].frames.push_back(tagged_frame(float(k) * 0.1f));
  }
  std::vector<LabeledVideo> videos;
  for (uint32_t v = 0; v < 3; ++v) videos.push_back({v, int(v % 2), &seqs[v]});

  const auto rep = coherency_report(line_embed, videos, 3, 0);
  CHECK(rep.mean_tac == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.mean_mac == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.per_video.size() == 3);
}

TEST_CASE("coherency report averages per-video values") {
  // one right-angle video (tac pi/2) and one U-turn video (tac pi)
  const EmbedFn embed = [](const Image& img) {
    const int k = int(std::lround(double(img.at(0, 0, 0)) * 10.0));
    const int v = int(std::lround(double(img.at(0, 0, 1)) * 10.0));
    if (v == 0) {
      const Vec pts[3] = {{0, 0}, {1, 0}, {1, 1}};
      return pts[k];
    }
    const Vec pts[3] = {{0, 0}, {1, 0}, {0, 0}};
    return pts[k];
  };
  std::vector<VideoSequence> seqs(2);
  for (int v = 0; v < 2; ++v) {
    for (int k = 0; k < 3; ++k) {
      Image img = tagged_frame(float(k) * 0.1f);
      img.at(0, 0, 1) = float(v) * 0.1f;
      seqs[size_t(v)].frames.push_back(img);
    }
  }
  std::vector<LabeledVideo> videos{{0, -1, &seqs[0]}, {1, -1, &seqs[1]}};
  const auto rep = coherency_report(embed, videos, 2, 0);
  CHECK(rep.mean_tac == doctest::Approx(3 * kPi / 4).epsilon(1e-9));

  // single video: the mean equals that video's value
  const auto solo = coherency_report(embed, {videos[0]}, 1, 0);
  CHECK(solo.mean_tac == doctest::Approx(kPi / 2).epsilon(1e-9));
  CHECK(solo.per_video.size() == 1);
}

TEST_CASE("coherency report class-even sampling and serialization") {
  const EmbedFn embed = [](const Image&) { return Vec{1.0, 0.0}; };
  std::vector<VideoSequence> seqs(6);
  std::vector<LabeledVideo> videos;
  for (uint32_t v = 0; v < 6; ++v) {
    for (int k = 0; k < 4; ++k) seqs[v].frames.push_back(tagged_frame(0.0f));
    videos.push_back({v, int(v / 2), &seqs[v]});  // labels 0,0,1,1,2,2
  }
  const auto rep = coherency_report(embed, videos, 3, 5);
  REQUIRE(rep.per_video.size() == 3);
  // one from each class
  std::set<int> classes;
  for (const auto& row : rep.per_video) classes.insert(int(row.video_id / 2));
  CHECK(classes.size() == 3);
  CHECK(rep.skipped_segments);  // constant embedding collapses every segment

  const auto path = std::filesystem::temp_directory_path() / "tce_coh_report.tsv";
  write_coherency_report(rep, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "video_id\tframes\ttac\tmac");
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 3);
  std::filesystem::remove(path);
}
