#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tce/nn.hpp"
#include "test_util.hpp"

using namespace tce;
using nn::Encoder;
using nn::EncoderConfig;

namespace {

template <typename T>
std::vector<T> random_buffer(Rng& rng, size_t n) {
  std::vector<T> v(n);
  for (auto& x : v) x = T(rng.gaussian());
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// kernels: OpenMP versions are bit-identical to the serial reference
// ---------------------------------------------------------------------------

TEST_CASE("conv kernels match the serial reference bit for bit") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + int(rng.uniform_int(5));
    const int ci = 1 + int(rng.uniform_int(6));
    const int co = 1 + int(rng.uniform_int(8));
    const int hi = 5 + int(rng.uniform_int(12));
    const int wi = 5 + int(rng.uniform_int(12));
    const int k = 3, stride = 1 + int(rng.uniform_int(2)), pad = 1;
    const int ho = kernels::conv_out_extent(hi, k, stride, pad);
    const int wo = kernels::conv_out_extent(wi, k, stride, pad);

    const auto x = random_buffer<float>(rng, size_t(n) * ci * hi * wi);
    const auto w = random_buffer<float>(rng, size_t(co) * ci * k * k);
    const auto b = random_buffer<float>(rng, size_t(co));

    std::vector<float> y_ref(size_t(n) * co * ho * wo), y_omp(y_ref.size());
    kernels::serial::conv2d_forward(x.data(), n, ci, hi, wi, w.data(), b.data(), co, k, stride,
                                    pad, y_ref.data(), ho, wo);
    kernels::conv2d_forward(x.data(), n, ci, hi, wi, w.data(), b.data(), co, k, stride, pad,
                            y_omp.data(), ho, wo);
    CHECK(y_ref == y_omp);

    const auto dy = random_buffer<float>(rng, y_ref.size());
    std::vector<float> dx_ref(x.size()), dx_omp(x.size());
    kernels::serial::conv2d_backward_input(dy.data(), n, co, ho, wo, w.data(), ci, k, stride, pad,
                                           dx_ref.data(), hi, wi);
    kernels::conv2d_backward_input(dy.data(), n, co, ho, wo, w.data(), ci, k, stride, pad,
                                   dx_omp.data(), hi, wi);
    CHECK(dx_ref == dx_omp);

    std::vector<float> dw_ref(w.size(), 0.0f), dw_omp(w.size(), 0.0f);
    std::vector<float> db_ref(b.size(), 0.0f), db_omp(b.size(), 0.0f);
    kernels::serial::conv2d_backward_params(dy.data(), x.data(), n, ci, hi, wi, co, k, stride, pad,
                                            ho, wo, dw_ref.data(), db_ref.data());
    kernels::conv2d_backward_params(dy.data(), x.data(), n, ci, hi, wi, co, k, stride, pad, ho, wo,
                                    dw_omp.data(), db_omp.data());
    CHECK(dw_ref == dw_omp);
    CHECK(db_ref == db_omp);
  }
}

TEST_CASE("bank similarity scan matches the serial reference") {
  Rng rng(18);
  const size_t rows = 777;
  const int dim = 32;
  const auto bank = random_buffer<float>(rng, rows * size_t(dim));
  const Vec anchor = testutil::random_unit(rng, dim);
  std::vector<double> ref(rows), omp(rows);
  kernels::serial::bank_similarity(bank.data(), rows, dim, anchor.data(), ref.data());
  kernels::bank_similarity(bank.data(), rows, dim, anchor.data(), omp.data());
  CHECK(ref == omp);
  for (double s : ref) {
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("conv forward hand fixture") {
  // 1x1x3x3 input, identity-ish kernel: center tap only
  const std::vector<float> x{1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<float> w(9, 0.0f);
  w[4] = 2.0f;  // center of the 3x3 kernel
  const std::vector<float> b{0.5f};
  std::vector<float> y(9);
  kernels::serial::conv2d_forward(x.data(), 1, 1, 3, 3, w.data(), b.data(), 1, 3, 1, 1, y.data(),
                                  3, 3);
  for (int i = 0; i < 9; ++i) CHECK(y[size_t(i)] == doctest::Approx(2.0f * x[size_t(i)] + 0.5f));
}

// ---------------------------------------------------------------------------
// encoder contract
// ---------------------------------------------------------------------------

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.in_channels = 3;
  cfg.widths = {4, 6};
  cfg.embedding_dim = 8;
  cfg.rotation_head = true;
  return cfg;
}

Image random_image(Rng& rng, int n) {
  Image img(n, n, 3);
  for (auto& v : img.data) v = float(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("encoder output is unit-norm and deterministic") {
  Rng rng(19);
  const Encoder<float> enc(tiny_config(), 7);
  for (int i = 0; i < 20; ++i) {
    const Image img = random_image(rng, 8);
    const Vec e1 = enc.embed(img);
    const Vec e2 = enc.embed(img);
    CHECK(e1 == e2);
    double norm = 0.0;
    for (double v : e1) norm += v * v;
    CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-5);
  }
  const Image wrong_channels(8, 8, 1);
  CHECK_THROWS_AS(enc.embed(wrong_channels), std::invalid_argument);
}

TEST_CASE("encoder does not collapse at initialization") {
  Rng rng(23);
  const Encoder<float> enc(tiny_config(), 99);
  std::vector<Vec> embs;
  for (int i = 0; i < 12; ++i) embs.push_back(enc.embed(random_image(rng, 8)));
  for (size_t a = 0; a < embs.size(); ++a) {
    for (size_t b = a + 1; b < embs.size(); ++b) {
      CHECK(cosine_similarity(embs[a], embs[b]) < 0.999);
    }
  }
}

TEST_CASE("encoder analytic gradients match finite differences (double)") {
  // tiny configuration; loss = <embedding, g1> + <rot_logits, g2>
  EncoderConfig cfg = tiny_config();
  Encoder<double> enc(cfg, 13);
  Rng rng(29);
  const int n = 2, h = 8, w = 8;
  const auto input = random_buffer<double>(rng, size_t(n) * 3 * h * w);
  const auto g_emb = random_buffer<double>(rng, size_t(n) * cfg.embedding_dim);
  const auto g_rot = random_buffer<double>(rng, size_t(n) * 4);

  const auto value = [&] {
    Encoder<double>::Trace tr;
    enc.forward(input.data(), n, h, w, tr);
    double v = 0.0;
    for (size_t i = 0; i < tr.embeddings.size(); ++i) v += tr.embeddings[i] * g_emb[i];
    for (size_t i = 0; i < tr.rot_logits.size(); ++i) v += tr.rot_logits[i] * g_rot[i];
    return v;
  };

  Encoder<double>::Trace tr;
  enc.forward(input.data(), n, h, w, tr);
  enc.zero_grad();
  enc.backward(tr, g_emb, g_rot);

  const double step = 1e-5;
  double worst = 0.0;
  for (auto& p : enc.params()) {
    for (size_t i = 0; i < p.value->size(); ++i) {
      const double orig = (*p.value)[i];
      (*p.value)[i] = orig + step;
      const double fp = value();
      (*p.value)[i] = orig - step;
      const double fm = value();
      (*p.value)[i] = orig;
      const double numeric = (fp - fm) / (2 * step);
      const double analytic = (*p.grad)[i];
      const double err =
          std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("sgd momentum update rule") {
  nn::Sgd<float> opt(0.1, 0.5);
  std::vector<float> w{1.0f};
  std::vector<float> g{2.0f};
  std::vector<nn::ParamRef<float>> params{{"w", &w, &g, {1}}};
  opt.step(params);
  // v = 2 -> w = 1 - 0.1*2 = 0.8
  CHECK(w[0] == doctest::Approx(0.8f));
  opt.step(params);
  // v = 0.5*2 + 2 = 3 -> w = 0.8 - 0.3 = 0.5
  CHECK(w[0] == doctest::Approx(0.5f));
}

TEST_CASE("classifier probe mode leaves the trunk untouched") {
  EncoderConfig cfg = tiny_config();
  Rng scratch(1);
  nn::Classifier<float> cls;
  cls.num_classes = 4;
  cls.trunk = nn::ConvStack<float>(3, cfg.widths, cfg.kernel, scratch);
  cls.head.init(cls.trunk.pooled_dim(), 4, scratch);

  Rng rng(2);
  const auto input = random_buffer<float>(rng, size_t(2) * 3 * 8 * 8);
  nn::Classifier<float>::Trace tr;
  cls.forward(input.data(), 2, 8, 8, tr, true, nullptr);
  const auto d_logits = random_buffer<float>(rng, size_t(2) * 4);
  cls.zero_grad();
  cls.backward(tr, d_logits, /*trunk_grads=*/false);
  for (const auto& st : cls.trunk.stages) {
    for (float g : st.grad_weight) CHECK(g == 0.0f);
    for (float g : st.grad_bias) CHECK(g == 0.0f);
  }
  bool head_nonzero = false;
  for (float g : cls.head.grad_weight) head_nonzero = head_nonzero || g != 0.0f;
  CHECK(head_nonzero);
}
