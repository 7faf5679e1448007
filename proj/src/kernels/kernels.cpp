// SPDX-License-Identifier: Apache-2.0
#include "edgespeech/kernels/kernels.hpp"

#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace edgespeech::kernels {

namespace {
std::atomic<bool> g_parallel{true};

inline double dot_stride(const double* a, size_t sa, const double* b,
                         size_t sb, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i * sa] * b[i * sb];
  return acc;
}
}  // namespace

bool parallel_enabled() {
#ifdef _OPENMP
  return g_parallel.load(std::memory_order_relaxed);
#else
  return false;
#endif
}

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

// ---------------------------------------------------------------------------
// matmul

void matmul(const double* a, const double* b, double* c, size_t m, size_t k,
            size_t n, bool trans_a, bool trans_b, bool accumulate) {
  // Strides of op(A) and op(B) in the untransposed storage.
  const size_t a_row = trans_a ? 1 : k;
  const size_t a_col = trans_a ? m : 1;
  const size_t b_row = trans_b ? 1 : n;
  const size_t b_col = trans_b ? k : 1;
  const long mm = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (parallel_enabled() && mm > 4)
  for (long i = 0; i < mm; ++i) {
    for (size_t j = 0; j < n; ++j) {
      double acc =
          dot_stride(a + static_cast<size_t>(i) * a_row, a_col, b + j * b_col,
                     b_row, k);
      double* out = c + static_cast<size_t>(i) * n + j;
      *out = accumulate ? *out + acc : acc;
    }
  }
}

void ref::matmul(const double* a, const double* b, double* c, size_t m,
                 size_t k, size_t n, bool trans_a, bool trans_b,
                 bool accumulate) {
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (size_t p = 0; p < k; ++p) {
        double av = trans_a ? a[p * m + i] : a[i * k + p];
        double bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      double* out = c + i * n + j;
      *out = accumulate ? *out + acc : acc;
    }
  }
}

// ---------------------------------------------------------------------------
// conv1d

void conv1d_forward(const double* x, size_t c_in, size_t l_in, const double* w,
                    size_t c_out, size_t kernel, size_t stride,
                    size_t pad_left, const double* bias, double* y,
                    size_t l_out) {
  const long co_n = static_cast<long>(c_out);
#pragma omp parallel for schedule(static) if (parallel_enabled() && co_n > 1)
  for (long co = 0; co < co_n; ++co) {
    const double* wc = w + static_cast<size_t>(co) * c_in * kernel;
    double* yc = y + static_cast<size_t>(co) * l_out;
    for (size_t t = 0; t < l_out; ++t) {
      double acc = bias ? bias[co] : 0.0;
      const long start = static_cast<long>(t * stride) -
                         static_cast<long>(pad_left);
      for (size_t ci = 0; ci < c_in; ++ci) {
        const double* xc = x + ci * l_in;
        const double* wk = wc + ci * kernel;
        for (size_t j = 0; j < kernel; ++j) {
          long pos = start + static_cast<long>(j);
          if (pos >= 0 && pos < static_cast<long>(l_in))
            acc += xc[pos] * wk[j];
        }
      }
      yc[t] = acc;
    }
  }
}

void ref::conv1d_forward(const double* x, size_t c_in, size_t l_in,
                         const double* w, size_t c_out, size_t kernel,
                         size_t stride, size_t pad_left, const double* bias,
                         double* y, size_t l_out) {
  for (size_t co = 0; co < c_out; ++co) {
    for (size_t t = 0; t < l_out; ++t) {
      double acc = bias ? bias[co] : 0.0;
      const long start =
          static_cast<long>(t * stride) - static_cast<long>(pad_left);
      for (size_t ci = 0; ci < c_in; ++ci) {
        for (size_t j = 0; j < kernel; ++j) {
          long pos = start + static_cast<long>(j);
          if (pos >= 0 && pos < static_cast<long>(l_in))
            acc += x[ci * l_in + pos] * w[(co * c_in + ci) * kernel + j];
        }
      }
      y[co * l_out + t] = acc;
    }
  }
}

void conv1d_grad_input(const double* gy, size_t c_out, size_t l_out,
                       const double* w, size_t c_in, size_t kernel,
                       size_t stride, size_t pad_left, double* gx,
                       size_t l_in) {
  const long ci_n = static_cast<long>(c_in);
  // Parallel over input channels: each gx row is written by one iteration.
#pragma omp parallel for schedule(static) if (parallel_enabled() && ci_n > 1)
  for (long ci = 0; ci < ci_n; ++ci) {
    double* gxc = gx + static_cast<size_t>(ci) * l_in;
    for (size_t p = 0; p < l_in; ++p) gxc[p] = 0.0;
    for (size_t co = 0; co < c_out; ++co) {
      const double* gyc = gy + co * l_out;
      const double* wk = w + (co * c_in + static_cast<size_t>(ci)) * kernel;
      for (size_t t = 0; t < l_out; ++t) {
        const long start =
            static_cast<long>(t * stride) - static_cast<long>(pad_left);
        for (size_t j = 0; j < kernel; ++j) {
          long pos = start + static_cast<long>(j);
          if (pos >= 0 && pos < static_cast<long>(l_in))
            gxc[pos] += gyc[t] * wk[j];
        }
      }
    }
  }
}

void conv1d_grad_weight(const double* gy, size_t c_out, size_t l_out,
                        const double* x, size_t c_in, size_t l_in,
                        size_t kernel, size_t stride, size_t pad_left,
                        double* gw) {
  const long co_n = static_cast<long>(c_out);
#pragma omp parallel for schedule(static) if (parallel_enabled() && co_n > 1)
  for (long co = 0; co < co_n; ++co) {
    const double* gyc = gy + static_cast<size_t>(co) * l_out;
    for (size_t ci = 0; ci < c_in; ++ci) {
      const double* xc = x + ci * l_in;
      for (size_t j = 0; j < kernel; ++j) {
        double acc = 0.0;
        for (size_t t = 0; t < l_out; ++t) {
          long pos = static_cast<long>(t * stride) -
                     static_cast<long>(pad_left) + static_cast<long>(j);
          if (pos >= 0 && pos < static_cast<long>(l_in))
            acc += gyc[t] * xc[pos];
        }
        gw[(static_cast<size_t>(co) * c_in + ci) * kernel + j] = acc;
      }
    }
  }
}

void conv1d_grad_bias(const double* gy, size_t c_out, size_t l_out,
                      double* gb) {
  for (size_t co = 0; co < c_out; ++co) gb[co] = sum(gy + co * l_out, l_out);
}

// ---------------------------------------------------------------------------
// elementwise

#define EDGESPEECH_MAP(expr)                                               \
  const long nn = static_cast<long>(n);                                   \
  _Pragma("omp parallel for schedule(static) if (parallel_enabled() && nn > 65536)") \
  for (long i = 0; i < nn; ++i) {                                          \
    out[i] = (expr);                                                       \
  }

void add(const double* a, const double* b, double* out, size_t n) {
  EDGESPEECH_MAP(a[i] + b[i])
}
void sub(const double* a, const double* b, double* out, size_t n) {
  EDGESPEECH_MAP(a[i] - b[i])
}
void mul(const double* a, const double* b, double* out, size_t n) {
  EDGESPEECH_MAP(a[i] * b[i])
}
void scale(const double* a, double s, double* out, size_t n) {
  EDGESPEECH_MAP(a[i] * s)
}
void relu(const double* a, double* out, size_t n) {
  EDGESPEECH_MAP(a[i] > 0.0 ? a[i] : 0.0)
}
void relu_grad(const double* a, const double* g, double* out, size_t n) {
  EDGESPEECH_MAP(a[i] > 0.0 ? g[i] : 0.0)
}
void sigmoid(const double* a, double* out, size_t n) {
  EDGESPEECH_MAP(1.0 / (1.0 + std::exp(-a[i])))
}
void tanh_map(const double* a, double* out, size_t n) {
  EDGESPEECH_MAP(std::tanh(a[i]))
}

#undef EDGESPEECH_MAP

void axpy(double alpha, const double* x, double* y, size_t n) {
  const long nn = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (parallel_enabled() && nn > 65536)
  for (long i = 0; i < nn; ++i) y[i] += alpha * x[i];
}

// ---------------------------------------------------------------------------
// reductions

double ref::sum(const double* a, size_t n) {
  const size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  double total = 0.0;
  for (size_t c = 0; c < chunks; ++c) {
    const size_t lo = c * kReduceChunk;
    const size_t hi = lo + kReduceChunk < n ? lo + kReduceChunk : n;
    double part = 0.0;
    for (size_t i = lo; i < hi; ++i) part += a[i];
    total += part;
  }
  return total;
}

double sum(const double* a, size_t n) {
  const size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  if (chunks < 2 || !parallel_enabled()) return ref::sum(a, n);
  std::vector<double> parts(chunks, 0.0);
  const long cn = static_cast<long>(chunks);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < cn; ++c) {
    const size_t lo = static_cast<size_t>(c) * kReduceChunk;
    const size_t hi = lo + kReduceChunk < n ? lo + kReduceChunk : n;
    double part = 0.0;
    for (size_t i = lo; i < hi; ++i) part += a[i];
    parts[c] = part;
  }
  double total = 0.0;
  for (double p : parts) total += p;
  return total;
}

double sq_dist(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// nearest centroid

void ref::nearest_rows(const double* points, size_t n, const double* centroids,
                       size_t k, size_t dim, uint32_t* idx_out,
                       double* dists_out) {
  for (size_t i = 0; i < n; ++i) {
    const double* p = points + i * dim;
    double best = sq_dist(p, centroids, dim);
    uint32_t best_j = 0;
    for (size_t j = 1; j < k; ++j) {
      double d = sq_dist(p, centroids + j * dim, dim);
      if (d < best) {
        best = d;
        best_j = static_cast<uint32_t>(j);
      }
    }
    idx_out[i] = best_j;
    if (dists_out) dists_out[i] = best;
  }
}

void nearest_rows(const double* points, size_t n, const double* centroids,
                  size_t k, size_t dim, uint32_t* idx_out, double* dists_out) {
  const long nn = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (parallel_enabled() && nn > 64)
  for (long i = 0; i < nn; ++i) {
    const double* p = points + static_cast<size_t>(i) * dim;
    double best = sq_dist(p, centroids, dim);
    uint32_t best_j = 0;
    for (size_t j = 1; j < k; ++j) {
      double d = sq_dist(p, centroids + j * dim, dim);
      if (d < best) {
        best = d;
        best_j = static_cast<uint32_t>(j);
      }
    }
    idx_out[i] = best_j;
    if (dists_out) dists_out[i] = best;
  }
}

}  // namespace edgespeech::kernels
