#include "tce/kernels.hpp"

#include <algorithm>

namespace tce::kernels {

namespace {

inline double row_similarity(const float* row, int dim, const double* anchor,
                             double anchor_norm) {
  double dot = 0.0, nr2 = 0.0;
  for (int d = 0; d < dim; ++d) {
    dot += double(row[d]) * anchor[d];
    nr2 += double(row[d]) * double(row[d]);
  }
  const double denom = std::sqrt(nr2) * anchor_norm;
  if (denom <= 0.0) return 0.0;
  return std::clamp(dot / denom, -1.0, 1.0);
}

inline double norm_of(const double* v, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += v[d] * v[d];
  return std::sqrt(s);
}

}  // namespace

namespace serial {

void bank_similarity(const float* rows, size_t count, int dim, const double* anchor,
                     double* sims) {
  const double an = norm_of(anchor, dim);
  for (size_t r = 0; r < count; ++r) {
    sims[r] = row_similarity(rows + r * size_t(dim), dim, anchor, an);
  }
}

}  // namespace serial

void bank_similarity(const float* rows, size_t count, int dim, const double* anchor, double* sims) {
  const double an = norm_of(anchor, dim);
  const auto n = static_cast<ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (ptrdiff_t r = 0; r < n; ++r) {
    sims[r] = row_similarity(rows + size_t(r) * size_t(dim), dim, anchor, an);
  }
}

}  // namespace tce::kernels
