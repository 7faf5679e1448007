// SPDX-License-Identifier: Apache-2.0
#include "edgespeech/corpus/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "edgespeech/core/error.hpp"

namespace edgespeech::io {

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts unsupported");

std::vector<std::string>* g_access_log = nullptr;

void put_u64_le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64_le(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_u16_le(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_f32_le(std::string& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

float get_f32_le(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

std::string header(Dtype dtype, const std::vector<size_t>& dims) {
  std::string out = "EDGT";
  out.push_back(static_cast<char>(dtype));
  out.push_back(static_cast<char>(dims.size()));
  for (size_t d : dims) put_u64_le(out, d);
  return out;
}

struct Parsed {
  Dtype dtype;
  std::vector<size_t> dims;
  const uint8_t* payload;
  size_t payload_len;
};

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  if (g_access_log) g_access_log->push_back(path);
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

Parsed parse(const std::vector<uint8_t>& bytes, const std::string& path) {
  require(bytes.size() >= 6 && std::memcmp(bytes.data(), "EDGT", 4) == 0,
          path + ": not a tensor file");
  Parsed p;
  uint8_t dtype = bytes[4];
  require(dtype == 1 || dtype == 2 || dtype == 3,
          path + ": unknown dtype code " + std::to_string(dtype));
  p.dtype = static_cast<Dtype>(dtype);
  size_t rank = bytes[5];
  require(bytes.size() >= 6 + 8 * rank, path + ": truncated header");
  p.dims.resize(rank);
  size_t n = 1;
  for (size_t i = 0; i < rank; ++i) {
    p.dims[i] = static_cast<size_t>(get_u64_le(bytes.data() + 6 + 8 * i));
    n *= p.dims[i];
  }
  p.payload = bytes.data() + 6 + 8 * rank;
  p.payload_len = bytes.size() - (6 + 8 * rank);
  require(p.payload_len == n * dtype_size(p.dtype),
          path + ": payload length mismatch");
  return p;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot open file for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), "write failed: " + path);
}

}  // namespace

size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::f32: return 4;
    case Dtype::u16: return 2;
    case Dtype::i8: return 1;
  }
  fail("unknown dtype");
}

void write_tensor(const Tensor& t, const std::string& path) {
  std::string bytes = header(Dtype::f32, t.shape);
  bytes.reserve(bytes.size() + 4 * t.numel());
  for (double v : t.data) put_f32_le(bytes, static_cast<float>(v));
  write_file(path, bytes);
}

Tensor read_tensor(const std::string& path) {
  auto bytes = read_file_bytes(path);
  Parsed p = parse(bytes, path);
  require(p.dtype == Dtype::f32, path + ": expected f32 tensor");
  Tensor t = Tensor::zeros(p.dims);
  for (size_t i = 0; i < t.numel(); ++i)
    t.data[i] = static_cast<double>(get_f32_le(p.payload + 4 * i));
  return t;
}

void write_units(const std::vector<uint16_t>& units, const std::string& path) {
  std::string bytes = header(Dtype::u16, {units.size()});
  for (uint16_t u : units) put_u16_le(bytes, u);
  write_file(path, bytes);
}

std::vector<uint16_t> read_units(const std::string& path) {
  auto bytes = read_file_bytes(path);
  Parsed p = parse(bytes, path);
  require(p.dtype == Dtype::u16, path + ": expected u16 tensor");
  require(p.dims.size() == 1, path + ": unit files are rank 1");
  std::vector<uint16_t> units(p.dims[0]);
  for (size_t i = 0; i < units.size(); ++i)
    units[i] = static_cast<uint16_t>(p.payload[2 * i]) |
               (static_cast<uint16_t>(p.payload[2 * i + 1]) << 8);
  return units;
}

void write_i8(const std::vector<int8_t>& values, const std::vector<size_t>& dims,
              const std::string& path) {
  require(values.size() == shape_numel(dims), "i8 payload/shape mismatch");
  std::string bytes = header(Dtype::i8, dims);
  for (int8_t v : values) bytes.push_back(static_cast<char>(v));
  write_file(path, bytes);
}

std::vector<int8_t> read_i8(const std::string& path,
                            std::vector<size_t>* dims_out) {
  auto bytes = read_file_bytes(path);
  Parsed p = parse(bytes, path);
  require(p.dtype == Dtype::i8, path + ": expected i8 tensor");
  if (dims_out) *dims_out = p.dims;
  std::vector<int8_t> out(p.payload_len);
  std::memcpy(out.data(), p.payload, p.payload_len);
  return out;
}

void set_access_log(std::vector<std::string>* sink) { g_access_log = sink; }

void write_text(const std::string& path, const std::string& contents) {
  write_file(path, contents);
}

std::string read_text(const std::string& path) {
  if (g_access_log) g_access_log->push_back(path);
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace edgespeech::io
