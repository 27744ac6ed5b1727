#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tce/core.hpp"
#include "tce/rng.hpp"

namespace tce::testutil {

inline Vec random_unit(Rng& rng, int dim) {
  Vec v(size_t(dim), 0.0);
  for (auto& x : v) x = rng.gaussian();
  return normalize(v);
}

// random direction with a random (non-unit) scale, to exercise the norm terms
inline Vec random_scaled(Rng& rng, int dim, double lo = 0.5, double hi = 2.0) {
  Vec v = random_unit(rng, dim);
  const double s = lo + (hi - lo) * rng.uniform();
  for (auto& x : v) x *= s;
  return v;
}

// Central-difference check of analytic gradients. value_fn re-evaluates the
// loss from `inputs`; analytic[i] must align with inputs[i]. Returns the worst
// relative error, with |a| + |n| floored at 1 so near-zero slots compare
// absolutely.
inline double max_grad_error(const std::function<double()>& value_fn, std::vector<Vec>& inputs,
                             const std::vector<Vec>& analytic, double step = 1e-5) {
  double worst = 0.0;
  for (size_t vi = 0; vi < inputs.size(); ++vi) {
    for (size_t d = 0; d < inputs[vi].size(); ++d) {
      const double orig = inputs[vi][d];
      inputs[vi][d] = orig + step;
      const double fp = value_fn();
      inputs[vi][d] = orig - step;
      const double fm = value_fn();
      inputs[vi][d] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[vi][d];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace tce::testutil
