// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace edgespeech {

// Counter-based splittable generator. The stream for a given seed is a pure
// function of (seed, draw index), so it is identical across runs, platforms
// and thread layouts. Constants are the SplitMix64 increment and finalizer:
//
//   GAMMA = 0x9E3779B97F4A7C15
//   mix(x) = (((x ^ x>>30) * 0xBF58476D1CE4E5B9) ^ ·>>27) * 0x94D049BB133111EB ^ ·>>31
//   draw i of seed s = mix(mix(s) + (i+1) * GAMMA)
//
// split(k) derives an independent child stream keyed by (seed, k); children
// with distinct keys never share draws with each other or the parent.
class Rng {
 public:
  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  explicit Rng(uint64_t seed) : base_(mix(seed)), counter_(0) {}

  static uint64_t mix(uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
  }

  uint64_t next_u64() {
    ++counter_;
    return mix(base_ + counter_ * kGamma);
  }

  // Independent substream; deterministic in (seed, key) only.
  Rng split(uint64_t key) const {
    Rng child(0);
    child.base_ = mix(base_ ^ mix(key + kGamma));
    child.counter_ = 0;
    return child;
  }

  // Uniform in [0, 1), 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0. Lemire's multiply-shift map.
  uint64_t uniform_int(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; consumes two draws per call.
  double normal();

  // Fisher-Yates permutation of 0..n-1.
  std::vector<size_t> permutation(size_t n);

 private:
  uint64_t base_;
  uint64_t counter_;
};

}  // namespace edgespeech
