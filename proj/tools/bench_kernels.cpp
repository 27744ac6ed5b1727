// Timings of the OpenMP kernels against the serial reference. Build and run:
//   cmake --build build --target bench_kernels && ./build/bench_kernels

#include <chrono>
#include <cstdio>
#include <vector>

#include "tce/kernels.hpp"
#include "tce/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <class F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, ms_since(t0));
  }
  return best;
}

std::vector<float> random_buf(size_t n, tce::Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.gaussian());
  return v;
}

}  // namespace

int main() {
  tce::Rng rng(42);

  // conv shapes taken from the default encoder on a batch of 100 frames
  struct Shape {
    int n, ci, hi, wi, co;
  };
  const Shape shapes[] = {{100, 3, 32, 32, 16}, {100, 16, 16, 16, 32}, {100, 32, 8, 8, 64}};
  const int kernel = 3, stride = 2, pad = 1;

  std::printf("%-34s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");
  for (const auto& s : shapes) {
    const int ho = tce::kernels::conv_out_extent(s.hi, kernel, stride, pad);
    const int wo = tce::kernels::conv_out_extent(s.wi, kernel, stride, pad);
    const auto x = random_buf(size_t(s.n) * s.ci * s.hi * s.wi, rng);
    const auto w = random_buf(size_t(s.co) * s.ci * kernel * kernel, rng);
    const auto b = random_buf(size_t(s.co), rng);
    std::vector<float> y(size_t(s.n) * s.co * ho * wo);
    std::vector<float> dx(x.size());
    std::vector<float> dw(w.size()), db(b.size());

    char label[64];
    std::snprintf(label, sizeof(label), "conv2d_forward %dx%dx%dx%d->%d", s.n, s.ci, s.hi, s.wi,
                  s.co);
    double ts = time_best_of(5, [&] {
      tce::kernels::serial::conv2d_forward(x.data(), s.n, s.ci, s.hi, s.wi, w.data(), b.data(),
                                           s.co, kernel, stride, pad, y.data(), ho, wo);
    });
    double tp = time_best_of(5, [&] {
      tce::kernels::conv2d_forward(x.data(), s.n, s.ci, s.hi, s.wi, w.data(), b.data(), s.co,
                                   kernel, stride, pad, y.data(), ho, wo);
    });
    std::printf("%-34s %10.3f %10.3f %7.2fx\n", label, ts, tp, ts / tp);

    std::snprintf(label, sizeof(label), "conv2d_backward_input");
    ts = time_best_of(5, [&] {
      tce::kernels::serial::conv2d_backward_input(y.data(), s.n, s.co, ho, wo, w.data(), s.ci,
                                                  kernel, stride, pad, dx.data(), s.hi, s.wi);
    });
    tp = time_best_of(5, [&] {
      tce::kernels::conv2d_backward_input(y.data(), s.n, s.co, ho, wo, w.data(), s.ci, kernel,
                                          stride, pad, dx.data(), s.hi, s.wi);
    });
    std::printf("%-34s %10.3f %10.3f %7.2fx\n", label, ts, tp, ts / tp);

    std::snprintf(label, sizeof(label), "conv2d_backward_params");
    ts = time_best_of(5, [&] {
      std::fill(dw.begin(), dw.end(), 0.0f);
      std::fill(db.begin(), db.end(), 0.0f);
      tce::kernels::serial::conv2d_backward_params(y.data(), x.data(), s.n, s.ci, s.hi, s.wi, s.co,
                                                   kernel, stride, pad, ho, wo, dw.data(),
                                                   db.data());
    });
    tp = time_best_of(5, [&] {
      std::fill(dw.begin(), dw.end(), 0.0f);
      std::fill(db.begin(), db.end(), 0.0f);
      tce::kernels::conv2d_backward_params(y.data(), x.data(), s.n, s.ci, s.hi, s.wi, s.co, kernel,
                                           stride, pad, ho, wo, dw.data(), db.data());
    });
    std::printf("%-34s %10.3f %10.3f %7.2fx\n", label, ts, tp, ts / tp);
  }

  // memory-bank similarity scan at a UCF-ish desk scale
  {
    const size_t rows = 50000;
    const int dim = 128;
    const auto bank = random_buf(rows * size_t(dim), rng);
    std::vector<double> anchor(size_t(dim), 0.0);
    for (auto& v : anchor) v = rng.gaussian();
    std::vector<double> sims(rows);
    const double ts = time_best_of(5, [&] {
      tce::kernels::serial::bank_similarity(bank.data(), rows, dim, anchor.data(), sims.data());
    });
    const double tp = time_best_of(5, [&] {
      tce::kernels::bank_similarity(bank.data(), rows, dim, anchor.data(), sims.data());
    });
    std::printf("%-34s %10.3f %10.3f %7.2fx\n", "bank_similarity 50000x128", ts, tp, ts / tp);
  }
  return 0;
}
