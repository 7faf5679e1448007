// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace edgespeech {

class Rng;

// Dense row-major array of doubles. Rank 0 is a scalar (one element).
// Training arithmetic stays in 64-bit; the on-disk formats are 32-bit.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<size_t> s, std::vector<double> d);

  static Tensor zeros(const std::vector<size_t>& shape);
  static Tensor full(const std::vector<size_t>& shape, double value);
  static Tensor scalar(double value);
  static Tensor from(std::initializer_list<double> values);          // rank 1
  static Tensor matrix(size_t rows, size_t cols,
                       std::initializer_list<double> values);        // rank 2
  static Tensor uniform(const std::vector<size_t>& shape, Rng& rng,
                        double lo, double hi);

  size_t rank() const { return shape.size(); }
  size_t numel() const;
  size_t dim(size_t i) const { return shape[i]; }

  double& at(size_t i) { return data[i]; }
  double at(size_t i) const { return data[i]; }
  double& at(size_t i, size_t j) { return data[i * shape[1] + j]; }
  double at(size_t i, size_t j) const { return data[i * shape[1] + j]; }
  double& at(size_t i, size_t j, size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double at(size_t i, size_t j, size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  std::string shape_str() const;
};

size_t shape_numel(const std::vector<size_t>& shape);

}  // namespace edgespeech
