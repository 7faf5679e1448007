// SPDX-License-Identifier: Apache-2.0
#include "edgespeech/quantizers/quantizers.hpp"

#include <cmath>

#include "edgespeech/core/error.hpp"
#include "edgespeech/core/rng.hpp"
#include "edgespeech/kernels/kernels.hpp"

namespace edgespeech::quantizers {

namespace k = edgespeech::kernels;

VqResult vq_quantize(const std::vector<double>& z_e, const Tensor& codebook) {
  require(codebook.rank() == 2, "vq_quantize: codebook must be K x D");
  require(z_e.size() == codebook.shape[1],
          "vq_quantize: embedding width " + std::to_string(z_e.size()) +
              " != codebook width " + std::to_string(codebook.shape[1]));
  uint32_t idx = 0;
  double dist = 0.0;
  k::nearest_rows(z_e.data(), 1, codebook.data.data(), codebook.shape[0],
                  codebook.shape[1], &idx, &dist);
  const size_t d = codebook.shape[1];
  VqResult r;
  r.index = idx;
  r.sq_distance = dist;
  r.code.assign(codebook.data.begin() + idx * d,
                codebook.data.begin() + (idx + 1) * d);
  return r;
}

namespace {

// k-means++: D^2-weighted sampling over points, cumulative walk in point
// order so the draw is deterministic for a given stream.
Tensor kmeans_pp_init(const Tensor& points, size_t k, Rng& rng) {
  const size_t n = points.shape[0], dim = points.shape[1];
  Tensor centroids = Tensor::zeros({k, dim});
  size_t first = static_cast<size_t>(rng.uniform_int(n));
  std::copy(points.data.begin() + first * dim,
            points.data.begin() + (first + 1) * dim, centroids.data.begin());

  std::vector<double> d2(n);
  for (size_t c = 1; c < k; ++c) {
    for (size_t i = 0; i < n; ++i) {
      double best = 1e300;
      for (size_t j = 0; j < c; ++j)
        best = std::min(best, k::sq_dist(points.data.data() + i * dim,
                                         centroids.data.data() + j * dim, dim));
      d2[i] = best;
    }
    double total = 0.0;
    for (double v : d2) total += v;
    size_t pick;
    if (total <= 0.0) {
      pick = static_cast<size_t>(rng.uniform_int(n));
    } else {
      double r = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
    }
    std::copy(points.data.begin() + pick * dim,
              points.data.begin() + (pick + 1) * dim,
              centroids.data.begin() + c * dim);
  }
  return centroids;
}

}  // namespace

KmeansResult kmeans_fit(const Tensor& points, size_t k, uint64_t seed,
                        size_t max_iters, double tol) {
  require(points.rank() == 2, "kmeans_fit: points must be N x D");
  const size_t n = points.shape[0], dim = points.shape[1];
  require(k >= 1, "kmeans_fit: k must be >= 1");
  require(n >= k, "kmeans_fit: fewer points (" + std::to_string(n) +
                      ") than clusters (" + std::to_string(k) + ")");

  Rng rng = Rng(seed).split(0x6B6D);  // "km"
  KmeansResult result;
  result.centroids = kmeans_pp_init(points, k, rng);

  std::vector<uint32_t> assign(n);
  std::vector<double> dists(n);
  double prev_inertia = -1.0;
  for (size_t iter = 0; iter < max_iters; ++iter) {
    k::nearest_rows(points.data.data(), n, result.centroids.data.data(), k,
                    dim, assign.data(), dists.data());

    // empty clusters re-seed to the point farthest from its centroid
    std::vector<size_t> counts(k, 0);
    for (uint32_t a : assign) counts[a]++;
    for (size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      size_t far = 0;
      for (size_t i = 1; i < n; ++i)
        if (dists[i] > dists[far]) far = i;
      if (dists[far] <= 0.0) result.degenerate = true;
      std::copy(points.data.begin() + far * dim,
                points.data.begin() + (far + 1) * dim,
                result.centroids.data.begin() + c * dim);
      assign[far] = static_cast<uint32_t>(c);
      counts[c] = 1;
      dists[far] = 0.0;
    }

    // centroid update, fixed point order
    Tensor sums = Tensor::zeros({k, dim});
    for (size_t i = 0; i < n; ++i)
      for (size_t d = 0; d < dim; ++d)
        sums.data[assign[i] * dim + d] += points.data[i * dim + d];
    for (size_t c = 0; c < k; ++c)
      for (size_t d = 0; d < dim; ++d)
        result.centroids.data[c * dim + d] =
            sums.data[c * dim + d] / static_cast<double>(counts[c]);

    // inertia against the updated centroids
    k::nearest_rows(points.data.data(), n, result.centroids.data.data(), k,
                    dim, assign.data(), dists.data());
    double inertia = k::sum(dists.data(), n);
    if (prev_inertia >= 0.0)
      require(inertia <= prev_inertia * (1.0 + 1e-9) + 1e-12,
              "kmeans_fit: inertia increased");
    result.inertia_history.push_back(inertia);
    result.iterations = iter + 1;
    if (prev_inertia >= 0.0 &&
        std::abs(prev_inertia - inertia) <= tol * std::max(prev_inertia, 1e-30))
      break;
    prev_inertia = inertia;
  }

  // duplicated centroids mean the input could not support k distinct clusters
  for (size_t a = 0; a < k && !result.degenerate; ++a)
    for (size_t b = a + 1; b < k; ++b)
      if (k::sq_dist(result.centroids.data.data() + a * dim,
                     result.centroids.data.data() + b * dim, dim) == 0.0) {
        result.degenerate = true;
        break;
      }
  return result;
}

std::vector<uint16_t> kmeans_assign(const Tensor& points,
                                    const Tensor& codebook) {
  require(points.rank() == 2 && codebook.rank() == 2,
          "kmeans_assign: points and codebook must be rank 2");
  require(points.shape[1] == codebook.shape[1],
          "kmeans_assign: width mismatch " + std::to_string(points.shape[1]) +
              " vs " + std::to_string(codebook.shape[1]));
  const size_t n = points.shape[0];
  std::vector<uint32_t> idx(n);
  k::nearest_rows(points.data.data(), n, codebook.data.data(),
                  codebook.shape[0], codebook.shape[1], idx.data(), nullptr);
  std::vector<uint16_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = static_cast<uint16_t>(idx[i]);
  return out;
}

}  // namespace edgespeech::quantizers
