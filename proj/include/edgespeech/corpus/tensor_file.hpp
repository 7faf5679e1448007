// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgespeech/core/tensor.hpp"

namespace edgespeech::io {

// Tensor container used for every binary artifact (waveforms, checkpoints,
// unit sequences, quantized weights). Little-endian throughout:
//
//   magic   "EDGT"            4 bytes
//   dtype   u8                1 = f32, 2 = u16, 3 = i8
//   rank    u8
//   dims    rank * u64 LE
//   payload row-major, LE
enum class Dtype : uint8_t { f32 = 1, u16 = 2, i8 = 3 };

size_t dtype_size(Dtype d);

// f32 payload; values are doubles in memory, rounded to float on write.
void write_tensor(const Tensor& t, const std::string& path);
Tensor read_tensor(const std::string& path);

void write_units(const std::vector<uint16_t>& units, const std::string& path);
std::vector<uint16_t> read_units(const std::string& path);

void write_i8(const std::vector<int8_t>& values,
              const std::vector<size_t>& dims, const std::string& path);
std::vector<int8_t> read_i8(const std::string& path,
                            std::vector<size_t>* dims_out);

// Every read_* call reports its path here when a sink is installed; the
// pipeline uses this to account for what each stage touched.
void set_access_log(std::vector<std::string>* sink);

// Text helpers (used for manifests and reports).
void write_text(const std::string& path, const std::string& contents);
std::string read_text(const std::string& path);

}  // namespace edgespeech::io
