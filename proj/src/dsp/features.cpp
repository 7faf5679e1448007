// SPDX-License-Identifier: Apache-2.0
#include "edgespeech/dsp/features.hpp"

#include <cmath>
#include <numbers>

#include "edgespeech/core/error.hpp"

namespace edgespeech::dsp {

namespace {
constexpr double kPi = std::numbers::pi;

bool is_pow2(size_t n) { return n && (n & (n - 1)) == 0; }
}  // namespace

void fft(std::vector<double>& re, std::vector<double>& im) {
  const size_t n = re.size();
  require(is_pow2(n) && im.size() == n, "fft: size must be a power of two");
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t j = 0; j < len / 2; ++j) {
        const size_t a = i + j, b = i + j + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

Tensor stft(const Waveform& w, size_t fft_size, size_t hop, size_t window) {
  require(is_pow2(fft_size), "stft: fft size must be a power of two");
  require(window <= fft_size, "stft: window larger than fft size");
  require(w.samples.size() >= window,
          "stft: signal shorter than the analysis window (" +
              std::to_string(w.samples.size()) + " < " +
              std::to_string(window) + " samples)");

  const size_t n_frames = 1 + (w.samples.size() - window) / hop;
  const size_t n_bins = fft_size / 2 + 1;

  // periodic Hann
  std::vector<double> win(window);
  for (size_t i = 0; i < window; ++i)
    win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                  static_cast<double>(window));

  Tensor out = Tensor::zeros({n_frames, n_bins});
  const long fn = static_cast<long>(n_frames);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (fn > 8)
#endif
  for (long f = 0; f < fn; ++f) {
    std::vector<double> re(fft_size, 0.0), im(fft_size, 0.0);
    const size_t off = static_cast<size_t>(f) * hop;
    for (size_t i = 0; i < window; ++i) re[i] = w.samples[off + i] * win[i];
    fft(re, im);
    for (size_t b = 0; b < n_bins; ++b)
      out.at(static_cast<size_t>(f), b) = std::hypot(re[b], im[b]);
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Tensor mel_filterbank(size_t n_mels, size_t sample_rate, size_t fft_size) {
  const size_t n_bins = fft_size / 2 + 1;
  require(n_mels + 2 <= n_bins, "mel: filter count exceeds spectrum bins");
  const double mel_max = hz_to_mel(static_cast<double>(sample_rate) / 2.0);
  // n_mels + 2 evenly spaced mel points over [0, sr/2]
  std::vector<double> hz(n_mels + 2);
  for (size_t i = 0; i < hz.size(); ++i)
    hz[i] = mel_to_hz(mel_max * static_cast<double>(i) /
                      static_cast<double>(n_mels + 1));

  Tensor fb = Tensor::zeros({n_mels, n_bins});
  const double bin_hz = static_cast<double>(sample_rate) /
                        static_cast<double>(fft_size);
  for (size_t m = 0; m < n_mels; ++m) {
    const double lo = hz[m], center = hz[m + 1], hi = hz[m + 2];
    for (size_t b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      double v = 0.0;
      if (f > lo && f < hi)
        v = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
      fb.at(m, b) = v;
    }
  }
  return fb;
}

Tensor log_mel(const Tensor& mag_frames, size_t n_mels, size_t sample_rate,
               size_t fft_size) {
  require(mag_frames.rank() == 2, "log_mel: expected T x bins magnitudes");
  require(mag_frames.shape[1] == fft_size / 2 + 1,
          "log_mel: frame width " + std::to_string(mag_frames.shape[1]) +
              " != fft_size/2+1");
  Tensor fb = mel_filterbank(n_mels, sample_rate, fft_size);
  const size_t t_frames = mag_frames.shape[0];
  const size_t n_bins = mag_frames.shape[1];
  Tensor out = Tensor::zeros({t_frames, n_mels});
  const long tn = static_cast<long>(t_frames);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (tn > 8)
#endif
  for (long t = 0; t < tn; ++t) {
    for (size_t m = 0; m < n_mels; ++m) {
      // filters applied in the power domain
      double acc = 0.0;
      for (size_t b = 0; b < n_bins; ++b) {
        double mag = mag_frames.at(static_cast<size_t>(t), b);
        acc += fb.at(m, b) * mag * mag;
      }
      out.at(static_cast<size_t>(t), m) =
          std::log(acc > kLogFloor ? acc : kLogFloor);
    }
  }
  return out;
}

Tensor log_mel_of(const Waveform& w) { return log_mel(stft(w)); }

}  // namespace edgespeech::dsp
