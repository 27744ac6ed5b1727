#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "tce/mining.hpp"
#include "test_util.hpp"

using namespace tce;

TEST_CASE("radius endpoints and fixtures") {
  MiningSchedule s;  // r0 = -1, r_end = 1
  s.epochs = 9.0;
  CHECK(radius(s, 0.0) == -1.0);  // exact
  CHECK(std::abs(radius(s, s.epochs) - 0.9865241060018291) <= 1e-12);
  CHECK(std::abs(radius(s, s.epochs / 2) - 0.8358300027522024) <= 1e-9);
  // closed form at the end, for arbitrary limits
  MiningSchedule w{-0.25, 0.75, 4.0, true};
  const double expected = -0.25 + (0.75 + 0.25) * (1.0 - std::exp(-5.0));
  CHECK(std::abs(radius(w, 4.0) - expected) <= 1e-12);
}

TEST_CASE("radius is monotone nondecreasing on a dense grid") {
  MiningSchedule s;
  s.epochs = 9.0;
  double prev = radius(s, 0.0);
  for (int i = 1; i <= 10000; ++i) {
    const double cur = radius(s, s.epochs * double(i) / 10000.0);
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("radius argument and schedule validation") {
  MiningSchedule s;
  s.epochs = 9.0;
  CHECK_THROWS_AS(radius(s, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(radius(s, 9.1), std::invalid_argument);
  MiningSchedule bad{0.5, -0.5, 9.0, true};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  MiningSchedule out_of_range{-2.0, 1.0, 9.0, true};
  CHECK_THROWS_AS(out_of_range.validate(), std::invalid_argument);
}

namespace {

// bank with one entry per video, each entry at a prescribed similarity to the
// anchor (1, 0)
MemoryBank bank_with_similarities(const std::vector<double>& sims) {
  DatasetIndex idx;
  for (uint32_t v = 0; v < sims.size(); ++v) idx.videos.push_back({v, 2, "v", -1});
  auto bank = MemoryBank::init(idx, 2, BankMode::PerVideo, 0);
  for (uint32_t v = 0; v < sims.size(); ++v) {
    const double s = sims[v];
    const float x = float(s);
    const float y = float(std::sqrt(std::max(0.0, 1.0 - s * s)));
    bank.update({v, 0}, std::vector<float>{x, y});
  }
  return bank;
}

// independent oracle: full sort of all entries under the published rule
std::vector<BankKey> oracle_select(const MemoryBank& bank, const Vec& anchor,
                                   uint32_t anchor_video, size_t n, double r, Rng& rng) {
  struct Entry {
    BankKey key;
    double sim;
  };
  std::vector<Entry> eligible, outside;
  for (size_t i = 0; i < bank.keys().size(); ++i) {
    const BankKey k = bank.keys()[i];
    if (k.video == anchor_video) continue;
    const Vec row = bank.entry_as_vec(k);
    const double s = cosine_similarity(anchor, row);
    (s <= r ? eligible : outside).push_back({k, s});
  }
  std::sort(eligible.begin(), eligible.end(), [](const Entry& a, const Entry& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return a.key < b.key;
  });
  std::vector<BankKey> out;
  for (size_t i = 0; i < eligible.size() && out.size() < n; ++i) out.push_back(eligible[i].key);
  if (out.size() < n) {
    // outside is already in ascending key order (bank keys are sorted)
    const auto picks = rng.sample_without_replacement(outside.size(), n - out.size());
    for (size_t p : picks) out.push_back(outside[p].key);
  }
  return out;
}

}  // namespace

TEST_CASE("selection fixture: two entries just inside the cap") {
  const std::vector<double> sims{0.9, 0.5, 0.1, -0.2, -0.6, -0.9};
  const auto bank = bank_with_similarities(sims);
  const Vec anchor{1, 0};
  Rng rng(1);
  const auto keys = select_negatives(bank, anchor, /*anchor_video=*/100, 2, 0.2, rng);
  REQUIRE(keys.size() == 2);
  CHECK(keys[0].video == 2);  // similarity 0.1
  CHECK(keys[1].video == 3);  // similarity -0.2
}

TEST_CASE("selection at the schedule boundaries") {
  const std::vector<double> sims{0.9, 0.5, 0.1, -0.2, -0.6, -0.9};
  const auto bank = bank_with_similarities(sims);
  const Vec anchor{1, 0};

  // r = 1: everything eligible, so the globally most similar win
  Rng rng(2);
  const auto hardest = select_negatives(bank, anchor, 100, 3, 1.0, rng);
  REQUIRE(hardest.size() == 3);
  CHECK(hardest[0].video == 0);
  CHECK(hardest[1].video == 1);
  CHECK(hardest[2].video == 2);

  // r = -1: nothing eligible (strict cap below every similarity), all random
  Rng rng_a(3), rng_b(3);
  const auto random_fill = select_negatives(bank, anchor, 100, 4, -1.0, rng_a);
  const auto oracle_fill = oracle_select(bank, anchor, 100, 4, -1.0, rng_b);
  CHECK(random_fill == oracle_fill);
}

TEST_CASE("selection matches the brute-force oracle on random banks") {
  Rng meta(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int videos = 3 + int(meta.uniform_int(8));
    const int frames = 1 + int(meta.uniform_int(int(1000) / videos));
    DatasetIndex idx;
    for (int v = 0; v < videos; ++v) idx.videos.push_back({uint32_t(v), std::max(2, frames), "v", -1});
    auto bank = MemoryBank::init(idx, 8, BankMode::PerFrame, meta.next_u64());

    const Vec anchor = testutil::random_unit(meta, 8);
    const uint32_t anchor_video = uint32_t(meta.uniform_int(videos));
    const size_t max_n = bank.eligible_count(anchor_video);
    const size_t n = 1 + meta.uniform_int(max_n);
    const double r = 2.0 * meta.uniform() - 1.0;
    const uint64_t seed = meta.next_u64();

    Rng r1(seed), r2(seed);
    const auto got = select_negatives(bank, anchor, anchor_video, n, r, r1);
    const auto want = oracle_select(bank, anchor, anchor_video, n, r, r2);
    REQUIRE(got.size() == n);
    CHECK(got == want);
    for (const auto& k : got) CHECK(k.video != anchor_video);
  }
}

TEST_CASE("selection is deterministic for a fixed seed") {
  const auto bank = bank_with_similarities({0.8, 0.3, -0.1, -0.5});
  const Vec anchor{1, 0};
  Rng a(9), b(9);
  CHECK(select_negatives(bank, anchor, 0, 3, -0.9, a) ==
        select_negatives(bank, anchor, 0, 3, -0.9, b));
}

TEST_CASE("selection errors when candidates are insufficient") {
  const auto bank = bank_with_similarities({0.8, 0.3});
  const Vec anchor{1, 0};
  Rng rng(1);
  CHECK_THROWS_AS(select_negatives(bank, anchor, 0, 2, 0.5, rng), InsufficientNegativesError);
}
