#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

// Data-parallel inner loops used by the encoder and the negative-mining scan.
//
// Every parallel kernel partitions work over independent output slots and
// keeps a fixed accumulation order inside each slot, so results are
// bit-identical to the serial reference regardless of thread count. The
// serial versions under kernels::serial are the plain-loop reference used by
// the unit tests and the kernel benchmark.

namespace tce::kernels {

inline int conv_out_extent(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

namespace serial {

// y[n,co,ho,wo] = conv(x[n,ci,hi,wi], w[co,ci,k,k]) + b[co]
template <typename T>
void conv2d_forward(const T* x, int n, int ci, int hi, int wi, const T* w, const T* b, int co,
                    int kernel, int stride, int pad, T* y, int ho, int wo) {
  for (int img = 0; img < n; ++img) {
    for (int oc = 0; oc < co; ++oc) {
      const T* wbase = w + size_t(oc) * ci * kernel * kernel;
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          T acc = b != nullptr ? b[oc] : T(0);
          for (int ic = 0; ic < ci; ++ic) {
            const T* xbase = x + (size_t(img) * ci + ic) * hi * wi;
            const T* wrow = wbase + size_t(ic) * kernel * kernel;
            for (int ky = 0; ky < kernel; ++ky) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= hi) continue;
              for (int kx = 0; kx < kernel; ++kx) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= wi) continue;
                acc += wrow[ky * kernel + kx] * xbase[size_t(iy) * wi + ix];
              }
            }
          }
          y[((size_t(img) * co + oc) * ho + oy) * wo + ox] = acc;
        }
      }
    }
  }
}

// dx[n,ci,hi,wi] = correlate(dy[n,co,ho,wo], w). Overwrites dx.
template <typename T>
void conv2d_backward_input(const T* dy, int n, int co, int ho, int wo, const T* w, int ci,
                           int kernel, int stride, int pad, T* dx, int hi, int wi) {
  for (int img = 0; img < n; ++img) {
    for (int ic = 0; ic < ci; ++ic) {
      T* dxbase = dx + (size_t(img) * ci + ic) * hi * wi;
      for (size_t i = 0; i < size_t(hi) * wi; ++i) dxbase[i] = T(0);
      for (int oc = 0; oc < co; ++oc) {
        const T* dybase = dy + (size_t(img) * co + oc) * ho * wo;
        const T* wrow = w + (size_t(oc) * ci + ic) * kernel * kernel;
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox) {
            const T g = dybase[size_t(oy) * wo + ox];
            for (int ky = 0; ky < kernel; ++ky) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= hi) continue;
              for (int kx = 0; kx < kernel; ++kx) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= wi) continue;
                dxbase[size_t(iy) * wi + ix] += wrow[ky * kernel + kx] * g;
              }
            }
          }
        }
      }
    }
  }
}

// dw[co,ci,k,k] += sum over batch/space; db[co] += sum(dy). Accumulates.
template <typename T>
void conv2d_backward_params(const T* dy, const T* x, int n, int ci, int hi, int wi, int co,
                            int kernel, int stride, int pad, int ho, int wo, T* dw, T* db) {
  for (int oc = 0; oc < co; ++oc) {
    for (int ic = 0; ic < ci; ++ic) {
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          T acc = T(0);
          for (int img = 0; img < n; ++img) {
            const T* dybase = dy + (size_t(img) * co + oc) * ho * wo;
            const T* xbase = x + (size_t(img) * ci + ic) * hi * wi;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= hi) continue;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= wi) continue;
                acc += dybase[size_t(oy) * wo + ox] * xbase[size_t(iy) * wi + ix];
              }
            }
          }
          dw[((size_t(oc) * ci + ic) * kernel + ky) * kernel + kx] += acc;
        }
      }
    }
    if (db != nullptr) {
      T acc = T(0);
      for (int img = 0; img < n; ++img) {
        const T* dybase = dy + (size_t(img) * co + oc) * ho * wo;
        for (size_t i = 0; i < size_t(ho) * wo; ++i) acc += dybase[i];
      }
      db[oc] += acc;
    }
  }
}

// Cosine similarity of one anchor against every bank row (rows unit-norm
// within float rounding; renormalized here anyway so the result is exact for
// arbitrary rows). sims[r] in [-1, 1].
void bank_similarity(const float* rows, size_t count, int dim, const double* anchor, double* sims);

}  // namespace serial

template <typename T>
void conv2d_forward(const T* x, int n, int ci, int hi, int wi, const T* w, const T* b, int co,
                    int kernel, int stride, int pad, T* y, int ho, int wo) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int img = 0; img < n; ++img) {
    for (int oc = 0; oc < co; ++oc) {
      serial::conv2d_forward(x + size_t(img) * ci * hi * wi, 1, ci, hi, wi,
                             w + size_t(oc) * ci * kernel * kernel, b != nullptr ? b + oc : nullptr,
                             1, kernel, stride, pad,
                             // one (img, oc) slab of the output
                             y + ((size_t(img) * co + oc) * ho) * wo, ho, wo);
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* dy, int n, int co, int ho, int wo, const T* w, int ci,
                           int kernel, int stride, int pad, T* dx, int hi, int wi) {
#pragma omp parallel for schedule(static)
  for (int img = 0; img < n; ++img) {
    serial::conv2d_backward_input(dy + size_t(img) * co * ho * wo, 1, co, ho, wo, w, ci, kernel,
                                  stride, pad, dx + size_t(img) * ci * hi * wi, hi, wi);
  }
}

template <typename T>
void conv2d_backward_params(const T* dy, const T* x, int n, int ci, int hi, int wi, int co,
                            int kernel, int stride, int pad, int ho, int wo, T* dw, T* db) {
  // each thread owns the dw rows and db slot of its output channels; the
  // accumulation order inside a slot matches the serial reference exactly
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < co; ++oc) {
    for (int ic = 0; ic < ci; ++ic) {
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          T acc = T(0);
          for (int img = 0; img < n; ++img) {
            const T* dybase = dy + (size_t(img) * co + oc) * ho * wo;
            const T* xbase = x + (size_t(img) * ci + ic) * hi * wi;
            for (int oy = 0; oy < ho; ++oy) {
              const int iy = oy * stride - pad + ky;
              if (iy < 0 || iy >= hi) continue;
              for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride - pad + kx;
                if (ix < 0 || ix >= wi) continue;
                acc += dybase[size_t(oy) * wo + ox] * xbase[size_t(iy) * wi + ix];
              }
            }
          }
          dw[((size_t(oc) * ci + ic) * kernel + ky) * kernel + kx] += acc;
        }
      }
    }
    if (db != nullptr) {
      T acc = T(0);
      for (int img = 0; img < n; ++img) {
        const T* dybase = dy + (size_t(img) * co + oc) * ho * wo;
        for (size_t i = 0; i < size_t(ho) * wo; ++i) acc += dybase[i];
      }
      db[oc] += acc;
    }
  }
}

void bank_similarity(const float* rows, size_t count, int dim, const double* anchor, double* sims);

}  // namespace tce::kernels
