// SPDX-License-Identifier: Apache-2.0
#include "edgespeech/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "edgespeech/core/error.hpp"
#include "edgespeech/core/rng.hpp"
#include "edgespeech/corpus/tensor_file.hpp"

namespace edgespeech::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

void CorpusConfig::validate() const {
  require(speakers >= 2, "corpus config: speakers must be >= 2");
  require(content_symbols >= 2, "corpus config: content_symbols must be >= 2");
  require(utterances >= speakers * content_symbols,
          "corpus config: utterances must be >= speakers * content_symbols");
  require(symbols_min >= 1 && symbols_max >= symbols_min,
          "corpus config: bad symbols-per-utterance range");
  require(sample_rate == 16000, "corpus config: sample_rate must be 16000");
}

double speaker_f0(int speaker) { return 100.0 + 20.0 * speaker; }

// High-pass tilt (f/8000)^beta; larger beta attenuates low harmonics more,
// so speakers differ in comb slope as well as f0.
double speaker_tilt_exponent(int speaker) { return 0.15 + 0.05 * speaker; }

SymbolBands symbol_bands(int symbol) {
  return {400.0 + 180.0 * symbol, 2400.0 + 170.0 * symbol};
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFundamentalAmp = 0.3;
constexpr double kMaxHarmonicHz = 4200.0;

// Gaussian resonances; tails fall fast enough that adjacent symbols stay
// separable for every fundamental in the speaker range.
double band_gain(const SymbolBands& b, double f) {
  double d1 = (f - b.f1) / kBandWidthHz;
  double d2 = (f - b.f2) / kBandWidthHz;
  return std::exp(-d1 * d1) + 0.8 * std::exp(-d2 * d2);
}

std::string utt_id(size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "utt-%05zu", index);
  return buf;
}

}  // namespace

double harmonic_amplitude(int speaker, int symbol, double f) {
  return kFundamentalAmp *
         (0.5 * band_gain(symbol_bands(symbol), f) + 0.05) *
         std::pow(f / 8000.0, speaker_tilt_exponent(speaker));
}

std::vector<double> synth_utterance(int speaker,
                                    const std::vector<int>& symbols,
                                    uint64_t corpus_seed, size_t index) {
  const double f0 = speaker_f0(speaker);
  const size_t n = symbols.size() * kSegmentSamples;
  const double sr = 16000.0;

  std::vector<double> x(n, 0.0);
  const int harmonics = static_cast<int>(kMaxHarmonicHz / f0);
  for (size_t g = 0; g < symbols.size(); ++g) {
    const size_t lo = g * kSegmentSamples, hi = lo + kSegmentSamples;
    for (int h = 1; h <= harmonics; ++h) {
      const double fh = f0 * h;
      // the fundamental dominates the spectrum for every speaker
      const double amp = h == 1 ? kFundamentalAmp
                                : harmonic_amplitude(speaker, symbols[g], fh);
      const double w = 2.0 * kPi * fh / sr;
      for (size_t i = lo; i < hi; ++i)
        x[i] += amp * std::sin(w * static_cast<double>(i));
    }
  }

  // additive noise at -30 dB relative to the clean signal
  double rms = 0.0;
  for (double v : x) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n));
  const double sigma = rms * std::pow(10.0, kNoiseDb / 20.0);
  Rng noise = Rng(corpus_seed).split(0x10000 + index);
  for (double& v : x) v += sigma * noise.normal();

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.99)
    for (double& v : x) v *= 0.99 / peak;
  return x;
}

std::vector<UtteranceRecord> generate_corpus(const CorpusConfig& cfg,
                                             const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(fs::path(out_dir) / "wav");

  const size_t n = static_cast<size_t>(cfg.utterances);
  std::vector<UtteranceRecord> records(n);
  for (size_t u = 0; u < n; ++u) {
    Rng rng = Rng(cfg.seed).split(u);
    UtteranceRecord rec;
    rec.id = utt_id(u);
    rec.waveform_path = "wav/" + rec.id + ".wave.edgt";
    rec.speaker_id = static_cast<int>(u % cfg.speakers);
    const int count = cfg.symbols_min +
                      static_cast<int>(rng.uniform_int(
                          cfg.symbols_max - cfg.symbols_min + 1));
    rec.content_symbols.resize(count);
    for (int& s : rec.content_symbols)
      s = static_cast<int>(rng.uniform_int(cfg.content_symbols));
    rec.duration_s = static_cast<double>(count * kSegmentSamples) / 16000.0;
    records[u] = std::move(rec);
  }

  const long nn = static_cast<long>(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (long u = 0; u < nn; ++u) {
    const UtteranceRecord& rec = records[u];
    auto samples = synth_utterance(rec.speaker_id, rec.content_symbols,
                                   cfg.seed, static_cast<size_t>(u));
    const size_t len = samples.size();
    Tensor t({len}, std::move(samples));
    io::write_tensor(t, (fs::path(out_dir) / rec.waveform_path).string());
  }

  std::ostringstream manifest;
  for (const auto& rec : records) {
    json j;
    j["id"] = rec.id;
    j["waveform_path"] = rec.waveform_path;
    j["speaker_id"] = rec.speaker_id;
    j["content_symbols"] = rec.content_symbols;
    j["duration_s"] = rec.duration_s;
    manifest << j.dump() << "\n";
  }
  io::write_text((fs::path(out_dir) / "manifest.jsonl").string(),
                 manifest.str());

  json cj;
  cj["speakers"] = cfg.speakers;
  cj["content_symbols"] = cfg.content_symbols;
  cj["utterances"] = cfg.utterances;
  cj["symbols_min"] = cfg.symbols_min;
  cj["symbols_max"] = cfg.symbols_max;
  cj["seed"] = cfg.seed;
  cj["sample_rate"] = cfg.sample_rate;
  io::write_text((fs::path(out_dir) / "corpus.json").string(),
                 cj.dump(2) + "\n");

  // Reference similarity judgments for the semantic metric: ground-truth
  // symbol-multiset overlap with mild seeded noise, over sampled pairs.
  {
    Rng rng = Rng(cfg.seed).split(0xABCD);
    std::ostringstream csv;
    csv << "pair_id,item_a,item_b,judgment\n";
    const int pairs = 40;
    for (int p = 0; p < pairs; ++p) {
      size_t a = rng.uniform_int(n), b = rng.uniform_int(n);
      if (a == b) b = (b + 1) % n;
      std::vector<int> ca(cfg.content_symbols, 0), cb(cfg.content_symbols, 0);
      for (int s : records[a].content_symbols) ca[s]++;
      for (int s : records[b].content_symbols) cb[s]++;
      int inter = 0, uni = 0;
      for (int s = 0; s < cfg.content_symbols; ++s) {
        inter += std::min(ca[s], cb[s]);
        uni += std::max(ca[s], cb[s]);
      }
      double judgment =
          static_cast<double>(inter) / static_cast<double>(uni) +
          0.02 * rng.normal();
      csv << "pair-" << p << "," << records[a].id << "," << records[b].id
          << "," << judgment << "\n";
    }
    io::write_text((fs::path(out_dir) / "ssimi_judgments.csv").string(),
                   csv.str());
  }

  return records;
}

std::vector<UtteranceRecord> load_manifest(const std::string& corpus_dir) {
  std::string text =
      io::read_text((fs::path(corpus_dir) / "manifest.jsonl").string());
  std::vector<UtteranceRecord> records;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    UtteranceRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.waveform_path = j.at("waveform_path").get<std::string>();
    rec.speaker_id = j.at("speaker_id").get<int>();
    rec.content_symbols = j.at("content_symbols").get<std::vector<int>>();
    rec.duration_s = j.at("duration_s").get<double>();
    require(!rec.content_symbols.empty(),
            "manifest: empty content_symbols for " + rec.id);
    records.push_back(std::move(rec));
  }
  require(!records.empty(), "manifest: no records in " + corpus_dir);
  return records;
}

CorpusConfig load_config(const std::string& corpus_dir) {
  json j = json::parse(
      io::read_text((fs::path(corpus_dir) / "corpus.json").string()));
  CorpusConfig cfg;
  cfg.speakers = j.at("speakers").get<int>();
  cfg.content_symbols = j.at("content_symbols").get<int>();
  cfg.utterances = j.at("utterances").get<int>();
  cfg.symbols_min = j.at("symbols_min").get<int>();
  cfg.symbols_max = j.at("symbols_max").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.sample_rate = j.at("sample_rate").get<int>();
  return cfg;
}

dsp::Waveform load_waveform(const std::string& corpus_dir,
                            const UtteranceRecord& rec) {
  Tensor t =
      io::read_tensor((fs::path(corpus_dir) / rec.waveform_path).string());
  require(t.rank() == 1, "waveform file must be rank 1: " + rec.waveform_path);
  dsp::Waveform w;
  w.samples = std::move(t.data);
  return w;
}

}  // namespace edgespeech::corpus
