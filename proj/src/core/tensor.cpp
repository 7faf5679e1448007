// SPDX-License-Identifier: Apache-2.0
#include "edgespeech/core/tensor.hpp"

#include <cmath>
#include <sstream>

#include "edgespeech/core/error.hpp"
#include "edgespeech/core/rng.hpp"

namespace edgespeech {

size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  require(data.size() == shape_numel(shape),
          "tensor: data length " + std::to_string(data.size()) +
              " does not match shape " + shape_str());
}

Tensor Tensor::zeros(const std::vector<size_t>& shape) {
  Tensor t;
  t.shape = shape;
  t.data.assign(shape_numel(shape), 0.0);
  return t;
}

Tensor Tensor::full(const std::vector<size_t>& shape, double value) {
  Tensor t;
  t.shape = shape;
  t.data.assign(shape_numel(shape), value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.data.assign(1, value);
  return t;
}

Tensor Tensor::from(std::initializer_list<double> values) {
  Tensor t;
  t.shape = {values.size()};
  t.data.assign(values);
  return t;
}

Tensor Tensor::matrix(size_t rows, size_t cols,
                      std::initializer_list<double> values) {
  require(values.size() == rows * cols, "tensor: matrix literal size mismatch");
  Tensor t;
  t.shape = {rows, cols};
  t.data.assign(values);
  return t;
}

Tensor Tensor::uniform(const std::vector<size_t>& shape, Rng& rng, double lo,
                       double hi) {
  Tensor t = zeros(shape);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

size_t Tensor::numel() const { return data.size(); }

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

}  // namespace edgespeech
