// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "edgespeech/core/error.hpp"
#include "edgespeech/core/rng.hpp"
#include "edgespeech/core/tensor.hpp"
#include "edgespeech/corpus/tensor_file.hpp"
#include "edgespeech/kernels/kernels.hpp"

using namespace edgespeech;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
  auto p = fs::temp_directory_path() / "edgespeech_test_core";
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("rng: identical seed gives identical stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: frozen draws for seed 42") {
  // First draws of the documented generator; these values are part of the
  // reproducibility contract and must never change.
  Rng r(42);
  CHECK(r.next_u64() == 0x989b3f130a063869ull);
  CHECK(r.next_u64() == 0x290db4bf2570ded7ull);
  CHECK(r.next_u64() == 0x2a990be63a01b2d5ull);
}

TEST_CASE("rng: uniform in [0,1) and uniform_int in range") {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.uniform_int(13) < 13);
  }
}

TEST_CASE("rng: split streams differ from parent and each other") {
  Rng r(5);
  Rng c0 = r.split(0), c1 = r.split(1);
  Rng r2(5);
  CHECK(c0.next_u64() != c1.next_u64());
  CHECK(r.split(0).next_u64() == Rng(5).split(0).next_u64());
  CHECK(c0.next_u64() != r2.next_u64());
}

TEST_CASE("rng: permutation is a permutation") {
  Rng r(9);
  auto p = r.permutation(100);
  std::vector<char> seen(100, 0);
  for (size_t v : p) {
    REQUIRE(v < 100);
    CHECK(!seen[v]);
    seen[v] = 1;
  }
}

TEST_CASE("tensor: shape/data invariants") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.numel() == 6);
  CHECK(Tensor::scalar(7.0).numel() == 1);
  CHECK(Tensor::scalar(7.0).rank() == 0);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), Error);
}

TEST_CASE("kernels: matmul matches reference and the 2x2 oracle") {
  // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
  double a[] = {1, 2, 3, 4}, b[] = {5, 6, 7, 8}, c[4];
  kernels::matmul(a, b, c, 2, 2, 2, false, false, false);
  CHECK(c[0] == 19.0);
  CHECK(c[1] == 22.0);
  CHECK(c[2] == 43.0);
  CHECK(c[3] == 50.0);

  // identity * A == A
  double eye[] = {1, 0, 0, 1};
  kernels::matmul(eye, b, c, 2, 2, 2, false, false, false);
  for (int i = 0; i < 4; ++i) CHECK(c[i] == b[i]);
}

TEST_CASE("kernels: parallel path is bit-identical to the serial reference") {
  Rng rng(1234);
  for (int trial = 0; trial < 20; ++trial) {
    size_t m = 1 + rng.uniform_int(40);
    size_t k = 1 + rng.uniform_int(40);
    size_t n = 1 + rng.uniform_int(40);
    std::vector<double> a(m * k), b(k * n), c1(m * n), c2(m * n);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    bool ta = rng.uniform() < 0.5, tb = rng.uniform() < 0.5;
    kernels::set_parallel(true);
    kernels::matmul(a.data(), b.data(), c1.data(), m, k, n, ta, tb, false);
    kernels::ref::matmul(a.data(), b.data(), c2.data(), m, k, n, ta, tb,
                         false);
    CHECK(c1 == c2);
  }
}

TEST_CASE("kernels: conv1d parallel equals serial reference") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    size_t cin = 1 + rng.uniform_int(4), cout = 1 + rng.uniform_int(5);
    size_t l = 8 + rng.uniform_int(64), kk = 1 + rng.uniform_int(6);
    size_t stride = 1 + rng.uniform_int(3);
    size_t pad = rng.uniform_int(kk);
    if (l + 2 * pad < kk) continue;
    size_t lout = (l + 2 * pad - kk) / stride + 1;
    std::vector<double> x(cin * l), w(cout * cin * kk), bias(cout);
    std::vector<double> y1(cout * lout), y2(cout * lout);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : w) v = rng.uniform(-1, 1);
    for (auto& v : bias) v = rng.uniform(-1, 1);
    kernels::conv1d_forward(x.data(), cin, l, w.data(), cout, kk, stride, pad,
                            bias.data(), y1.data(), lout);
    kernels::ref::conv1d_forward(x.data(), cin, l, w.data(), cout, kk, stride,
                                 pad, bias.data(), y2.data(), lout);
    CHECK(y1 == y2);
  }
}

TEST_CASE("kernels: chunked sum deterministic across parallel switch") {
  Rng rng(3);
  std::vector<double> v(100000);
  for (auto& x : v) x = rng.uniform(-1, 1);
  kernels::set_parallel(true);
  double s1 = kernels::sum(v.data(), v.size());
  kernels::set_parallel(false);
  double s2 = kernels::sum(v.data(), v.size());
  kernels::set_parallel(true);
  CHECK(s1 == s2);
  CHECK(s1 == kernels::ref::sum(v.data(), v.size()));
}

TEST_CASE("kernels: nearest_rows agrees with reference, ties to lowest") {
  Rng rng(11);
  size_t n = 500, k = 17, dim = 8;
  std::vector<double> pts(n * dim), cents(k * dim);
  for (auto& v : pts) v = rng.uniform(-1, 1);
  for (auto& v : cents) v = rng.uniform(-1, 1);
  std::vector<uint32_t> i1(n), i2(n);
  std::vector<double> d1(n), d2(n);
  kernels::nearest_rows(pts.data(), n, cents.data(), k, dim, i1.data(),
                        d1.data());
  kernels::ref::nearest_rows(pts.data(), n, cents.data(), k, dim, i2.data(),
                             d2.data());
  CHECK(i1 == i2);
  CHECK(d1 == d2);

  // equidistant point: two identical centroids, expect the lower index
  std::vector<double> c2 = {1.0, 1.0, 1.0, 1.0};
  std::vector<double> p2 = {0.0, 0.0};
  uint32_t idx;
  kernels::nearest_rows(p2.data(), 1, c2.data(), 2, 2, &idx, nullptr);
  CHECK(idx == 0);
}

TEST_CASE("tensor file: spec byte layout for 2x3 f32 zeros") {
  auto dir = temp_dir();
  auto path = (dir / "zeros.edgt").string();
  io::write_tensor(Tensor::zeros({2, 3}), path);
  std::string bytes = io::read_text(path);
  REQUIRE(bytes.size() == 4 + 1 + 1 + 16 + 24);
  CHECK(bytes.substr(0, 4) == "EDGT");
  CHECK(bytes[4] == 0x01);
  CHECK(bytes[5] == 0x02);
  const char dims[] = {2, 0, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0};
  CHECK(bytes.compare(6, 16, dims, 16) == 0);
  for (size_t i = 22; i < bytes.size(); ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("tensor file: rank-0 scalar has empty dims and 4-byte payload") {
  auto dir = temp_dir();
  auto path = (dir / "scalar.edgt").string();
  io::write_tensor(Tensor::scalar(7.0), path);
  std::string bytes = io::read_text(path);
  CHECK(bytes.size() == 6 + 4);
  CHECK(bytes[5] == 0x00);
  Tensor back = io::read_tensor(path);
  CHECK(back.rank() == 0);
  CHECK(back.data[0] == 7.0);
}

TEST_CASE("tensor file: seeded roundtrips are bit-identical") {
  auto dir = temp_dir();
  Rng rng(2024);
  for (int i = 0; i < 50; ++i) {
    size_t r = 1 + rng.uniform_int(5), c = 1 + rng.uniform_int(7);
    Tensor t = Tensor::uniform({r, c}, rng, -100.0, 100.0);
    // round to f32 first so the roundtrip comparison is exact
    for (auto& v : t.data) v = static_cast<double>(static_cast<float>(v));
    auto path = (dir / ("rt" + std::to_string(i) + ".edgt")).string();
    io::write_tensor(t, path);
    Tensor back = io::read_tensor(path);
    CHECK(back.shape == t.shape);
    CHECK(back.data == t.data);
  }
}

TEST_CASE("tensor file: u16 units roundtrip") {
  auto dir = temp_dir();
  auto path = (dir / "units.edgt").string();
  std::vector<uint16_t> units = {0, 1, 513, 65535};
  io::write_units(units, path);
  CHECK(io::read_units(path) == units);
}

TEST_CASE("tensor file: bad magic rejected") {
  auto dir = temp_dir();
  auto path = (dir / "bad.edgt").string();
  io::write_text(path, "XXXX\x01\x00");
  CHECK_THROWS_WITH_AS(io::read_tensor(path),
                       doctest::Contains("not a tensor file"), Error);
}

TEST_CASE("tensor file: truncated payload rejected") {
  auto dir = temp_dir();
  auto good = (dir / "good.edgt").string();
  io::write_tensor(Tensor::zeros({2, 2}), good);
  std::string bytes = io::read_text(good);
  auto bad = (dir / "trunc.edgt").string();
  io::write_text(bad, bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_WITH_AS(io::read_tensor(bad),
                       doctest::Contains("payload length mismatch"), Error);
}

TEST_CASE("tensor file: unknown dtype rejected") {
  auto dir = temp_dir();
  auto path = (dir / "dtype.edgt").string();
  std::string bytes = "EDGT";
  bytes.push_back(0x09);
  bytes.push_back(0x00);
  io::write_text(path, bytes);
  CHECK_THROWS_WITH_AS(io::read_tensor(path),
                       doctest::Contains("unknown dtype"), Error);
}
