// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgespeech/dsp/features.hpp"

namespace edgespeech::corpus {

// One corpus item. Speaker identity is a whole-utterance factor (fundamental
// frequency and spectral tilt); content is a per-segment factor (a pair of
// resonant bands per symbol), so the two can be probed independently.
struct UtteranceRecord {
  std::string id;
  std::string waveform_path;  // relative to the corpus directory
  int speaker_id = 0;
  std::vector<int> content_symbols;
  double duration_s = 0.0;
};

struct CorpusConfig {
  int speakers = 8;
  int content_symbols = 10;
  int utterances = 200;
  int symbols_min = 5;
  int symbols_max = 9;
  uint64_t seed = 42;
  int sample_rate = 16000;

  void validate() const;
};

inline constexpr size_t kSegmentSamples = 1600;  // 100 ms at 16 kHz

// Generator constants, exposed so oracle tests can classify from first
// principles.
double speaker_f0(int speaker);  // 100 + 20*s Hz
double speaker_tilt_exponent(int speaker);
struct SymbolBands {
  double f1, f2;  // resonance centers, Hz
};
SymbolBands symbol_bands(int symbol);
inline constexpr double kBandWidthHz = 130.0;
inline constexpr double kNoiseDb = -30.0;

// Amplitude of the harmonic at frequency f for (speaker, symbol); the
// fundamental has fixed amplitude above this law. Exposed so oracle
// classifiers can match the generator exactly.
double harmonic_amplitude(int speaker, int symbol, double f);

// Deterministic synthesis of one utterance (no noise normalization surprises:
// the same seed always yields the same bytes).
std::vector<double> synth_utterance(int speaker,
                                    const std::vector<int>& symbols,
                                    uint64_t corpus_seed, size_t index);

// Writes wav/<id>.wave.edgt files, manifest.jsonl, corpus.json (config echo)
// and ssimi_judgments.csv into out_dir. Returns the records.
std::vector<UtteranceRecord> generate_corpus(const CorpusConfig& cfg,
                                             const std::string& out_dir);

std::vector<UtteranceRecord> load_manifest(const std::string& corpus_dir);
CorpusConfig load_config(const std::string& corpus_dir);
dsp::Waveform load_waveform(const std::string& corpus_dir,
                            const UtteranceRecord& rec);

}  // namespace edgespeech::corpus
