#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "tce/memory_bank.hpp"
#include "test_util.hpp"

using namespace tce;

namespace {

DatasetIndex index_5_4() {
  DatasetIndex idx;
  idx.videos.push_back({0, 5, "a", -1});
  idx.videos.push_back({1, 4, "b", -1});
  return idx;
}

DatasetIndex index_3x4() {
  DatasetIndex idx;
  for (uint32_t v = 0; v < 3; ++v) idx.videos.push_back({v, 4, "v", -1});
  return idx;
}

double row_norm(std::span<const float> row) {
  double s = 0.0;
  for (float v : row) s += double(v) * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("init counts per mode") {
  const auto per_frame = MemoryBank::init(index_5_4(), 16, BankMode::PerFrame, 1);
  CHECK(per_frame.size() == 9);
  const auto per_video = MemoryBank::init(index_5_4(), 16, BankMode::PerVideo, 1);
  CHECK(per_video.size() == 2);
}

TEST_CASE("init is deterministic and unit-norm") {
  const auto a = MemoryBank::init(index_5_4(), 32, BankMode::PerFrame, 7);
  const auto b = MemoryBank::init(index_5_4(), 32, BankMode::PerFrame, 7);
  CHECK(a.rows() == b.rows());
  const auto c = MemoryBank::init(index_5_4(), 32, BankMode::PerFrame, 8);
  CHECK(a.rows() != c.rows());
  for (size_t r = 0; r < a.size(); ++r) {
    CHECK(std::abs(row_norm(a.entry(r)) - 1.0) <= 1e-5);
  }
}

TEST_CASE("update with rate 1 is bit-identical replacement") {
  auto bank = MemoryBank::init(index_5_4(), 8, BankMode::PerFrame, 3);
  Rng rng(9);
  const Vec unit = testutil::random_unit(rng, 8);
  std::vector<float> emb(unit.begin(), unit.end());
  bank.update({0, 2}, emb);
  const auto stored = bank.entry(BankKey{0, 2});
  for (int d = 0; d < 8; ++d) CHECK(stored[size_t(d)] == emb[size_t(d)]);

  // replacement path never degenerates, even for old == -new
  std::vector<float> flipped = emb;
  for (auto& v : flipped) v = -v;
  CHECK_NOTHROW(bank.update({0, 2}, flipped));
}

TEST_CASE("update blend fixture") {
  DatasetIndex idx;
  idx.videos.push_back({0, 2, "a", -1});
  auto bank = MemoryBank::init(idx, 2, BankMode::PerFrame, 3);
  // force a known old entry, then blend towards the orthogonal direction
  auto blend_bank = MemoryBank::restore({2}, 2, BankMode::PerFrame, 0.5,
                                        {1.0f, 0.0f, 1.0f, 0.0f});
  blend_bank.update({0, 0}, std::vector<float>{0.0f, 1.0f});
  const auto stored = blend_bank.entry(BankKey{0, 0});
  const float inv_sqrt2 = float(1.0 / std::sqrt(2.0));
  CHECK(stored[0] == doctest::Approx(inv_sqrt2).epsilon(1e-6));
  CHECK(stored[1] == doctest::Approx(inv_sqrt2).epsilon(1e-6));

  // fixed point: old == new
  blend_bank.update({0, 1}, std::vector<float>{1.0f, 0.0f});
  blend_bank.update({0, 1}, std::vector<float>{1.0f, 0.0f});
  CHECK(blend_bank.entry(BankKey{0, 1})[0] == doctest::Approx(1.0f));
}

TEST_CASE("update unknown key") {
  auto bank = MemoryBank::init(index_5_4(), 4, BankMode::PerFrame, 0);
  CHECK_THROWS_AS(bank.update({7, 0}, std::vector<float>{1, 0, 0, 0}), KeyError);
}

TEST_CASE("entries stay unit-norm under blended update sequences") {
  DatasetIndex idx;
  idx.videos.push_back({0, 10, "a", -1});
  auto bank = MemoryBank::restore(std::vector<int>{10}, 8, BankMode::PerFrame, 0.3,
                                  MemoryBank::init(idx, 8, BankMode::PerFrame, 1).rows());
  Rng rng(4);
  for (int step = 0; step < 200; ++step) {
    const auto key = BankKey{0, uint32_t(rng.uniform_int(10))};
    const Vec u = testutil::random_unit(rng, 8);
    bank.update(key, std::vector<float>(u.begin(), u.end()));
  }
  for (size_t r = 0; r < bank.size(); ++r) {
    CHECK(std::abs(row_norm(bank.entry(r)) - 1.0) <= 1e-5);
  }
}

TEST_CASE("uniform negatives exhaustive case") {
  const auto bank = MemoryBank::init(index_3x4(), 4, BankMode::PerFrame, 5);
  Rng rng(1);
  const auto keys = bank.sample_uniform_negatives(0, 8, rng);
  CHECK(keys.size() == 8);
  std::set<std::pair<uint32_t, uint32_t>> got;
  for (const auto& k : keys) {
    CHECK(k.video != 0);
    got.insert({k.video, k.frame});
  }
  CHECK(got.size() == 8);  // all keys of videos 1 and 2, each exactly once
}

TEST_CASE("uniform negatives boundary and empty cases") {
  const auto bank = MemoryBank::init(index_3x4(), 4, BankMode::PerFrame, 5);
  Rng rng(1);
  CHECK_THROWS_AS(bank.sample_uniform_negatives(0, 9, rng), InsufficientNegativesError);
  CHECK(bank.sample_uniform_negatives(0, 0, rng).empty());
}

TEST_CASE("uniform negatives never hit the excluded video") {
  const auto bank = MemoryBank::init(index_3x4(), 4, BankMode::PerFrame, 5);
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    for (const auto& k : bank.sample_uniform_negatives(1, 5, rng)) CHECK(k.video != 1);
  }
}

TEST_CASE("uniform negatives deterministic under seed") {
  const auto bank = MemoryBank::init(index_3x4(), 4, BankMode::PerFrame, 5);
  Rng r1(77), r2(77);
  const auto a = bank.sample_uniform_negatives(2, 4, r1);
  const auto b = bank.sample_uniform_negatives(2, 4, r2);
  CHECK(a == b);
}
