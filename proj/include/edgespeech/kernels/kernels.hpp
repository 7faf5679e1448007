// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace edgespeech::kernels {

// Production kernels are OpenMP-parallel over independent output elements,
// so they are bit-identical to the serial reference for any thread count.
// Reductions use a fixed 4096-element chunking (partials combined in chunk
// order) in both paths for the same reason.
//
// kernels::ref holds the plain-loop reference implementations; tests compare
// the two paths elementwise and the bench target times them.

inline constexpr size_t kReduceChunk = 4096;

bool parallel_enabled();
void set_parallel(bool on);

// C[M,N] = op(A) * op(B); op transposes when the flag is set.
// A is M×K (or K×M when trans_a), B is K×N (or N×K when trans_b).
void matmul(const double* a, const double* b, double* c, size_t m, size_t k,
            size_t n, bool trans_a, bool trans_b, bool accumulate);

// 1-D convolution over [channels, length] with implicit zero padding.
//   y[co, t] = bias[co] + sum_{ci, j} x[ci, t*stride + j - pad_left] * w[co, ci, j]
// y has extent [c_out, l_out]; bias may be null.
void conv1d_forward(const double* x, size_t c_in, size_t l_in, const double* w,
                    size_t c_out, size_t kernel, size_t stride,
                    size_t pad_left, const double* bias, double* y,
                    size_t l_out);
void conv1d_grad_input(const double* gy, size_t c_out, size_t l_out,
                       const double* w, size_t c_in, size_t kernel,
                       size_t stride, size_t pad_left, double* gx,
                       size_t l_in);
void conv1d_grad_weight(const double* gy, size_t c_out, size_t l_out,
                        const double* x, size_t c_in, size_t l_in,
                        size_t kernel, size_t stride, size_t pad_left,
                        double* gw);
void conv1d_grad_bias(const double* gy, size_t c_out, size_t l_out,
                      double* gb);

// Elementwise maps; out may alias an input.
void add(const double* a, const double* b, double* out, size_t n);
void sub(const double* a, const double* b, double* out, size_t n);
void mul(const double* a, const double* b, double* out, size_t n);
void scale(const double* a, double s, double* out, size_t n);
void axpy(double alpha, const double* x, double* y, size_t n);  // y += alpha*x
void relu(const double* a, double* out, size_t n);
void relu_grad(const double* a, const double* g, double* out, size_t n);
void sigmoid(const double* a, double* out, size_t n);
void tanh_map(const double* a, double* out, size_t n);

// Chunk-deterministic full reduction.
double sum(const double* a, size_t n);

// Squared Euclidean distance between rows of a [rows, dim] matrix and a
// single row vector.
double sq_dist(const double* a, const double* b, size_t n);

// For each of n points (row-major n×dim), the index of the nearest of k
// centroids (k×dim) by squared Euclidean distance, ties to the lowest index.
// dists_out (optional) receives the winning squared distance.
void nearest_rows(const double* points, size_t n, const double* centroids,
                  size_t k, size_t dim, uint32_t* idx_out, double* dists_out);

namespace ref {
// Plain serial reference implementations (kept for testing and benchmarks).
void matmul(const double* a, const double* b, double* c, size_t m, size_t k,
            size_t n, bool trans_a, bool trans_b, bool accumulate);
void conv1d_forward(const double* x, size_t c_in, size_t l_in, const double* w,
                    size_t c_out, size_t kernel, size_t stride,
                    size_t pad_left, const double* bias, double* y,
                    size_t l_out);
double sum(const double* a, size_t n);
void nearest_rows(const double* points, size_t n, const double* centroids,
                  size_t k, size_t dim, uint32_t* idx_out, double* dists_out);
}  // namespace ref

}  // namespace edgespeech::kernels
