// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "edgespeech/core/tensor.hpp"

namespace edgespeech::quantizers {

struct VqResult {
  uint32_t index;
  std::vector<double> code;
  double sq_distance;
};

// Nearest codebook row by squared Euclidean distance; ties break to the
// lowest index. codebook is K x D.
VqResult vq_quantize(const std::vector<double>& z_e, const Tensor& codebook);

struct KmeansResult {
  Tensor centroids;  // k x D
  std::vector<double> inertia_history;
  size_t iterations = 0;
  bool degenerate = false;  // duplicated centroids (all-identical inputs etc.)
};

// Lloyd's algorithm with k-means++ seeding from the documented Rng stream.
// Empty clusters are re-seeded to the point farthest from its centroid.
// Inertia is non-increasing per iteration (asserted); stops when the relative
// inertia change falls below tol.
KmeansResult kmeans_fit(const Tensor& points, size_t k, uint64_t seed,
                        size_t max_iters = 100, double tol = 1e-6);

// Nearest centroid per point, ties to the lowest index.
std::vector<uint16_t> kmeans_assign(const Tensor& points,
                                    const Tensor& codebook);

}  // namespace edgespeech::quantizers
