#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tce/losses.hpp"
#include "test_util.hpp"

using namespace tce;
using testutil::max_grad_error;
using testutil::random_scaled;
using testutil::random_unit;

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kLn4 = 1.3862943611198906;

std::vector<Vec> repeat(const Vec& v, size_t n) { return std::vector<Vec>(n, v); }

}  // namespace

// ---------------------------------------------------------------------------
// first-order loss
// ---------------------------------------------------------------------------

TEST_CASE("first order: symmetric two-way softmax gives ln 2") {
  const Vec anchor{1, 0, 0, 0};
  const Vec positive{0, 1, 0, 0};
  const std::vector<Vec> negatives{{0, 0, 1, 0}};  // same similarity (0) as the positive
  const auto r = first_order_loss(anchor, positive, negatives, 1.0);
  CHECK(r.value == doctest::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("first order: N equal similarities give ln(N+1)") {
  const Vec anchor{1, 0, 0, 0};
  const Vec positive{0, 1, 0, 0};
  for (size_t n : {1u, 3u, 7u, 20u}) {
    const auto r = first_order_loss(anchor, positive, repeat(Vec{0, 0, 1, 0}, n), 1.0);
    CHECK(std::abs(r.value - std::log(double(n + 1))) <= 1e-9);
  }
}

TEST_CASE("first order: s_pos=1 with two antipodal negatives") {
  const Vec anchor{1, 0};
  const Vec positive{1, 0};                       // s = 1
  const std::vector<Vec> negatives(2, Vec{-1, 0});  // s = -1
  const auto r = first_order_loss(anchor, positive, negatives, 1.0);
  // -ln(e / (e + 2 e^-1)) evaluated at high precision
  CHECK(r.value == doctest::Approx(0.2395447662218845).epsilon(1e-9));
}

TEST_CASE("first order: argument errors") {
  CHECK_THROWS_AS(first_order_loss(Vec{1, 0}, Vec{0, 1}, {}, 1.0), std::invalid_argument);
  const std::vector<Vec> negs{{0, 1}};
  CHECK_THROWS_AS(first_order_loss(Vec{1, 0}, Vec{0, 1}, negs, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(first_order_loss(Vec{0, 0}, Vec{0, 1}, negs, 1.0), DegenerateVectorError);
}

TEST_CASE("first order: strictly monotone in the similarities") {
  // positive at angle phi: s_pos = cos(phi) rises as phi falls
  const Vec anchor{1, 0};
  const std::vector<Vec> negatives{{0.2, 0.5}, {-0.3, 0.1}};
  double prev = first_order_loss(anchor, Vec{std::cos(2.8), std::sin(2.8)}, negatives, 0.7).value;
  for (double phi = 2.6; phi > 0.05; phi -= 0.2) {
    const double cur =
        first_order_loss(anchor, Vec{std::cos(phi), std::sin(phi)}, negatives, 0.7).value;
    CHECK(cur < prev);
    prev = cur;
  }
  // rotating one negative towards the anchor raises the loss
  prev = -1e300;
  for (double phi = 2.8; phi > 0.05; phi -= 0.2) {
    std::vector<Vec> negs = negatives;
    negs[0] = Vec{std::cos(phi), std::sin(phi)};
    const double cur = first_order_loss(anchor, Vec{0, 1}, negs, 0.7).value;
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("first order: gradient signs through the similarity") {
  // dL/ds via the chain rule against the circle parametrization
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec anchor{1, 0};
    const double phi = 0.2 + 2.6 * rng.uniform();
    const Vec positive{std::cos(phi), std::sin(phi)};
    const double psi = 0.2 + 2.6 * rng.uniform();
    const std::vector<Vec> negatives{{std::cos(psi), std::sin(psi)}};
    const auto r = first_order_loss(anchor, positive, negatives, 0.5 + rng.uniform());

    // dL/dphi = grad_pos . (-sin phi, cos phi); ds/dphi = -sin(phi) < 0
    const double dl_dphi = r.grads[1][0] * -std::sin(phi) + r.grads[1][1] * std::cos(phi);
    CHECK(dl_dphi / -std::sin(phi) < 0.0);  // dL/ds_pos < 0
    const double dl_dpsi = r.grads[2][0] * -std::sin(psi) + r.grads[2][1] * std::cos(psi);
    CHECK(dl_dpsi / -std::sin(psi) > 0.0);  // dL/ds_neg > 0
  }
}

TEST_CASE("first order: finite at extreme similarities with tau 0.01") {
  const Vec anchor{1, 0};
  for (double s_pos : {1.0, -1.0}) {
    const Vec positive{s_pos, 0};
    for (double s_neg : {1.0, -1.0}) {
      const auto r = first_order_loss(anchor, positive, repeat(Vec{s_neg, 0}, 4), 0.01);
      CHECK(std::isfinite(r.value));
      for (const auto& g : r.grads) {
        for (double x : g) CHECK(std::isfinite(x));
      }
    }
  }
}

TEST_CASE("first order: analytic gradients match central differences") {
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 16;
    const size_t m = 1 + rng.uniform_int(8);
    const double tau = 0.2 + 1.8 * rng.uniform();
    std::vector<Vec> inputs;
    inputs.push_back(random_scaled(rng, dim));
    inputs.push_back(random_scaled(rng, dim));
    for (size_t j = 0; j < m; ++j) inputs.push_back(random_scaled(rng, dim));

    const auto value = [&] {
      const std::vector<Vec> negs(inputs.begin() + 2, inputs.end());
      return first_order_loss(inputs[0], inputs[1], negs, tau).value;
    };
    const std::vector<Vec> negs(inputs.begin() + 2, inputs.end());
    const auto r = first_order_loss(inputs[0], inputs[1], negs, tau);
    worst = std::max(worst, max_grad_error(value, inputs, r.grads));
  }
  CHECK(worst <= 1e-4);
}

// ---------------------------------------------------------------------------
// NCE loss
// ---------------------------------------------------------------------------

TEST_CASE("nce: symmetric case gives (1+m) ln 2") {
  // all similarities 0, Z = K/m  =>  q = m/K = m * P_n for every candidate
  const Vec anchor{1, 0, 0};
  const Vec positive{0, 1, 0};
  for (size_t m : {1u, 5u, 8u}) {
    const size_t k = 24;
    const auto r = nce_loss(anchor, positive, repeat(Vec{0, 0, 1}, m), 1.0, k,
                            double(k) / double(m));
    CHECK(std::abs(r.value - double(1 + m) * kLn2) <= 1e-9);
  }
}

TEST_CASE("nce: perfect classifier limit approaches zero") {
  const Vec anchor{1, 0};
  const Vec positive{1, 0};
  const std::vector<Vec> negatives{{-1, 0}};
  const auto r = nce_loss(anchor, positive, negatives, 0.02, 10, 1.0);
  CHECK(r.value >= 0.0);
  CHECK(r.value <= 1e-9);
}

TEST_CASE("nce: argument errors") {
  const std::vector<Vec> negs{{0, 1}};
  CHECK_THROWS_AS(nce_loss(Vec{1, 0}, Vec{0, 1}, negs, 1.0, 10, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(nce_loss(Vec{1, 0}, Vec{0, 1}, negs, 1.0, 10, -2.0), std::invalid_argument);
  CHECK_THROWS_AS(nce_loss(Vec{1, 0}, Vec{0, 1}, negs, 1.0, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(nce_loss(Vec{1, 0}, Vec{0, 1}, {}, 1.0, 10, 1.0), std::invalid_argument);
}

TEST_CASE("nce: stable at sharp temperatures") {
  const Vec anchor{1, 0};
  const auto r = nce_loss(anchor, Vec{1, 0}, repeat(Vec{-1, 0}, 3), 0.01, 100, 2.5);
  CHECK(std::isfinite(r.value));
}

TEST_CASE("nce: ranks candidate positives exactly like the exact softmax") {
  // exhaustive small instances with the exact partition value
  Rng rng(202);
  int agreements = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 8;
    const size_t k = 2 + rng.uniform_int(63);  // pool size <= 64
    const double tau = 0.3 + 1.2 * rng.uniform();
    const Vec anchor = random_unit(rng, dim);
    std::vector<Vec> pool;
    for (size_t i = 0; i < k; ++i) pool.push_back(random_unit(rng, dim));

    double z_exact = 0.0;
    for (const auto& x : pool) z_exact += std::exp(cosine_similarity(anchor, x) / tau);

    size_t best_soft = 0, best_nce = 0;
    double soft_min = 1e300, nce_min = 1e300;
    for (size_t c = 0; c < k; ++c) {
      std::vector<Vec> negs;
      for (size_t i = 0; i < k; ++i) {
        if (i != c) negs.push_back(pool[i]);
      }
      if (negs.empty()) continue;
      const double ls = first_order_loss(anchor, pool[c], negs, tau).value;
      const double ln = nce_loss(anchor, pool[c], negs, tau, k, z_exact).value;
      if (ls < soft_min) {
        soft_min = ls;
        best_soft = c;
      }
      if (ln < nce_min) {
        nce_min = ln;
        best_nce = c;
      }
    }
    if (best_soft == best_nce) ++agreements;
  }
  CHECK(agreements == 100);
}

TEST_CASE("nce: analytic gradients match central differences") {
  Rng rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 16;
    const size_t m = 1 + rng.uniform_int(8);
    const double tau = 0.2 + 1.8 * rng.uniform();
    const size_t k = 4 + rng.uniform_int(60);
    const double z = std::exp(2.0 * rng.uniform() - 1.0) * double(k);
    std::vector<Vec> inputs;
    inputs.push_back(random_scaled(rng, dim));
    inputs.push_back(random_scaled(rng, dim));
    for (size_t j = 0; j < m; ++j) inputs.push_back(random_scaled(rng, dim));

    const auto value = [&] {
      const std::vector<Vec> negs(inputs.begin() + 2, inputs.end());
      return nce_loss(inputs[0], inputs[1], negs, tau, k, z).value;
    };
    const std::vector<Vec> negs(inputs.begin() + 2, inputs.end());
    const auto r = nce_loss(inputs[0], inputs[1], negs, tau, k, z);
    worst = std::max(worst, max_grad_error(value, inputs, r.grads));
  }
  CHECK(worst <= 1e-4);
}

// ---------------------------------------------------------------------------
// second-order loss
// ---------------------------------------------------------------------------

TEST_CASE("second order: symmetric single negative gives ln 2") {
  // u = (1,0); positive difference (0,1) and negative difference (0,-1) both
  // orthogonal to u
  const Vec f_t{0, 0};
  const Vec f_t1{1, 0};
  const Vec f_t2{1, 1};
  const std::vector<Vec> negatives{{1, -1}};
  const auto r = second_order_loss(f_t, f_t1, f_t2, negatives, 1.0);
  CHECK(r.value == doctest::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("second order: collinear steps score similarity one") {
  // positive term s2 = 1, negative built antipodal so the value is known
  const Vec f_t{0, 0};
  const Vec f_t1{1, 0};
  const Vec f_t2{2, 0};
  const std::vector<Vec> negatives{{0, 0}};  // difference (-1, 0), s2 = -1
  const auto r = second_order_loss(f_t, f_t1, f_t2, negatives, 1.0);
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(-1.0)));
  CHECK(r.value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("second order: degenerate differences") {
  const std::vector<Vec> negs{{5, 5}};
  CHECK_THROWS_AS(second_order_loss(Vec{1, 1}, Vec{1, 1}, Vec{2, 2}, negs, 1.0),
                  DegenerateSegmentError);
  CHECK_THROWS_AS(second_order_loss(Vec{0, 0}, Vec{1, 1}, Vec{1, 1}, negs, 1.0),
                  DegenerateSegmentError);
  const std::vector<Vec> bad{{1, 1}};  // negative equal to f_t1
  CHECK_THROWS_AS(second_order_loss(Vec{0, 0}, Vec{1, 1}, Vec{2, 2}, bad, 1.0),
                  DegenerateSegmentError);
}

TEST_CASE("second order: analytic gradients match central differences") {
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 16;
    const size_t m = 1 + rng.uniform_int(8);
    const double tau = 0.2 + 1.8 * rng.uniform();
    std::vector<Vec> inputs;
    for (int i = 0; i < 3; ++i) inputs.push_back(random_scaled(rng, dim));
    for (size_t j = 0; j < m; ++j) inputs.push_back(random_scaled(rng, dim));

    const auto value = [&] {
      const std::vector<Vec> negs(inputs.begin() + 3, inputs.end());
      return second_order_loss(inputs[0], inputs[1], inputs[2], negs, tau).value;
    };
    const std::vector<Vec> negs(inputs.begin() + 3, inputs.end());
    const auto r = second_order_loss(inputs[0], inputs[1], inputs[2], negs, tau);
    worst = std::max(worst, max_grad_error(value, inputs, r.grads));
  }
  CHECK(worst <= 1e-4);
}

// ---------------------------------------------------------------------------
// rotation auxiliary loss
// ---------------------------------------------------------------------------

TEST_CASE("rotation: uniform logits give ln 4") {
  for (int target = 0; target < 4; ++target) {
    const auto r = rotation_aux_loss(Vec{0.7, 0.7, 0.7, 0.7}, target);
    CHECK(std::abs(r.value - kLn4) <= 1e-12);
  }
}

TEST_CASE("rotation: one-hot tendency fixture") {
  const auto r = rotation_aux_loss(Vec{1, 0, 0, 0}, 0);
  CHECK(r.value == doctest::Approx(0.7436683806286792).epsilon(1e-9));
}

TEST_CASE("rotation: dominant target logit drives the loss to zero") {
  const auto r = rotation_aux_loss(Vec{1000, 0, 0, 0}, 0);
  CHECK(r.value >= 0.0);
  CHECK(r.value <= 1e-12);
}

TEST_CASE("rotation: argument errors") {
  CHECK_THROWS_AS(rotation_aux_loss(Vec{1, 2, 3}, 0), std::invalid_argument);
  CHECK_THROWS_AS(rotation_aux_loss(Vec{1, 2, 3, 4}, 4), std::invalid_argument);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(rotation_aux_loss(Vec{inf, 0, 0, 0}, 0), std::invalid_argument);
}

TEST_CASE("rotation: analytic gradients match central differences") {
  Rng rng(505);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec> inputs{Vec{4 * rng.gaussian(), 4 * rng.gaussian(), 4 * rng.gaussian(),
                                4 * rng.gaussian()}};
    const int target = int(rng.uniform_int(4));
    const auto value = [&] { return rotation_aux_loss(inputs[0], target).value; };
    const auto r = rotation_aux_loss(inputs[0], target);
    worst = std::max(worst, max_grad_error(value, inputs, r.grads));
  }
  CHECK(worst <= 1e-4);
}

// ---------------------------------------------------------------------------
// combined loss
// ---------------------------------------------------------------------------

TEST_CASE("combined: single term reproduces the first-order result exactly") {
  Rng rng(606);
  const Vec anchor = random_unit(rng, 8);
  const Vec positive = random_unit(rng, 8);
  const std::vector<Vec> negs{random_unit(rng, 8), random_unit(rng, 8)};
  const auto first = first_order_loss(anchor, positive, negs, 0.5);

  LossConfig cfg;
  cfg.first_order_weight = 1.0;
  cfg.second_order_weight = 0.0;
  cfg.aux_weight = 0.0;
  const auto combo = combined_loss(first, nullptr, nullptr, cfg);
  CHECK(combo.value == first.value);
  CHECK(combo.d_anchor == first.grads[0]);
  CHECK(combo.d_positive == first.grads[1]);
  REQUIRE(combo.d_negatives_first.size() == 2);
  CHECK(combo.d_negatives_first[0] == first.grads[2]);
  CHECK(combo.d_negatives_first[1] == first.grads[3]);
  CHECK(combo.d_third.empty());
  CHECK(combo.d_logits.empty());
}

TEST_CASE("combined: 5:1 arithmetic") {
  LossResult l1;
  l1.value = 1.0;
  l1.grads.assign(3, Vec(4, 0.0));
  LossResult l2;
  l2.value = 1.0;
  l2.grads.assign(4, Vec(4, 0.0));
  LossConfig cfg;
  cfg.first_order_weight = 5.0;
  cfg.second_order_weight = 1.0;
  cfg.aux_weight = 0.0;
  const auto combo = combined_loss(l1, &l2, nullptr, cfg);
  CHECK(combo.value == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("combined: all weights zero") {
  Rng rng(707);
  const Vec anchor = random_unit(rng, 4);
  const Vec positive = random_unit(rng, 4);
  const std::vector<Vec> negs{random_unit(rng, 4)};
  const auto first = first_order_loss(anchor, positive, negs, 1.0);
  const auto aux = rotation_aux_loss(Vec{1, 2, 3, 4}, 2);
  LossConfig cfg;
  cfg.first_order_weight = 0.0;
  cfg.second_order_weight = 0.0;
  cfg.aux_weight = 0.0;
  const auto combo = combined_loss(first, nullptr, &aux, cfg);
  CHECK(combo.value == 0.0);
  for (double g : combo.d_anchor) CHECK(g == 0.0);
  for (double g : combo.d_positive) CHECK(g == 0.0);
  for (double g : combo.d_logits) CHECK(g == 0.0);
}

TEST_CASE("combined: shared-embedding gradients accumulate and match differences") {
  Rng rng(808);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 16;
    const size_t m1 = 1 + rng.uniform_int(4);
    const size_t m2 = 1 + rng.uniform_int(4);
    LossConfig cfg;
    cfg.temperature = 0.3 + rng.uniform();
    cfg.first_order_weight = 5.0;
    cfg.second_order_weight = 1.0;
    cfg.aux_weight = 1.0;

    // inputs: anchor, positive, third, negs1..., negs2..., logits
    std::vector<Vec> inputs;
    for (int i = 0; i < 3; ++i) inputs.push_back(random_scaled(rng, dim));
    for (size_t j = 0; j < m1 + m2; ++j) inputs.push_back(random_scaled(rng, dim));
    inputs.push_back(Vec{rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian()});
    const int target = int(rng.uniform_int(4));

    const auto compute = [&] {
      const std::vector<Vec> negs1(inputs.begin() + 3, inputs.begin() + 3 + m1);
      const std::vector<Vec> negs2(inputs.begin() + 3 + m1, inputs.begin() + 3 + m1 + m2);
      const auto l1 = first_order_loss(inputs[0], inputs[1], negs1, cfg.temperature);
      const auto l2 = second_order_loss(inputs[0], inputs[1], inputs[2], negs2, cfg.temperature);
      const auto la = rotation_aux_loss(inputs.back(), target);
      return combined_loss(l1, &l2, &la, cfg);
    };
    const auto combo = compute();
    std::vector<Vec> analytic;
    analytic.push_back(combo.d_anchor);
    analytic.push_back(combo.d_positive);
    analytic.push_back(combo.d_third);
    for (const auto& g : combo.d_negatives_first) analytic.push_back(g);
    for (const auto& g : combo.d_negatives_second) analytic.push_back(g);
    analytic.push_back(combo.d_logits);

    const auto value = [&] { return compute().value; };
    worst = std::max(worst, max_grad_error(value, inputs, analytic));
  }
  CHECK(worst <= 1e-4);
}
