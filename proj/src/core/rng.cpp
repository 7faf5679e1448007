// SPDX-License-Identifier: Apache-2.0
#include "edgespeech/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace edgespeech {

double Rng::normal() {
  // u1 in (0,1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<size_t> Rng::permutation(size_t n) {
  std::vector<size_t> p(n);
  for (size_t i = 0; i < n; ++i) p[i] = i;
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(uniform_int(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace edgespeech
