// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "edgespeech/core/tensor.hpp"

namespace edgespeech::dsp {

inline constexpr size_t kSampleRate = 16000;
inline constexpr size_t kFftSize = 2048;
inline constexpr size_t kHop = 256;
inline constexpr size_t kWindow = 600;
inline constexpr size_t kMelBands = 80;
inline constexpr double kLogFloor = 1e-10;

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  size_t sample_rate = kSampleRate;
};

// In-place iterative radix-2 FFT over interleaved complex data; n must be a
// power of two.
void fft(std::vector<double>& re, std::vector<double>& im);

// Magnitude frames, T x (fft_size/2 + 1). Periodic Hann window of length
// `window`, zero-padded to `fft_size`; frames start at multiples of `hop`
// with no centering, so T = 1 + floor((len - window) / hop).
Tensor stft(const Waveform& w, size_t fft_size = kFftSize, size_t hop = kHop,
            size_t window = kWindow);

// Triangular mel filterbank on the HTK scale m = 2595 log10(1 + f/700),
// applied to magnitude frames, then natural log with floor 1e-10.
// Returns T x n_mels.
Tensor log_mel(const Tensor& mag_frames, size_t n_mels = kMelBands,
               size_t sample_rate = kSampleRate, size_t fft_size = kFftSize);

Tensor log_mel_of(const Waveform& w);

// The filterbank itself, n_mels x (fft_size/2+1); exposed for tests.
Tensor mel_filterbank(size_t n_mels, size_t sample_rate, size_t fft_size);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

}  // namespace edgespeech::dsp
