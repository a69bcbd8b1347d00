// Copyright 2026 The advsig Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef ADVSIG_CORPUS_HPP
#define ADVSIG_CORPUS_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "advsig/common.hpp"
#include "advsig/wav.hpp"

namespace advsig {

struct Utterance {
  std::string id;
  int speaker_id = 0;
  std::vector<Scalar> waveform;  // mono, samples on the PCM-16 grid in [-1,1]
  int sample_rate = 16000;

  Scalar duration_s() const { return static_cast<Scalar>(waveform.size()) / sample_rate; }
};

using Corpus = std::vector<Utterance>;

// ------------------------------ synthesis ----------------------------------

// Each synthetic speaker is a harmonic source with a speaker-specific
// fundamental, formant-like resonances and spectral tilt; utterances add
// pitch jitter, amplitude modulation and a little noise.
inline Corpus synth_corpus(int n_speakers, int utts_per_speaker, Scalar duration_s, std::uint64_t seed,
                           int sample_rate = 16000) {
  if (n_speakers < 1) throw ConfigError("synth_corpus: n_speakers must be >= 1");
  if (utts_per_speaker < 1) throw ConfigError("synth_corpus: utts_per_speaker must be >= 1");
  if (duration_s <= 0) throw ConfigError("synth_corpus: duration must be positive");

  const int n = static_cast<int>(duration_s * sample_rate);
  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(n_speakers) * utts_per_speaker);

  for (int s = 0; s < n_speakers; ++s) {
    Rng voice_rng(derive_seed(seed, "voice/" + std::to_string(s)));
    const Scalar f0 = 90.0 * std::pow(2.0, static_cast<Scalar>(s) / 12.0);
    const Scalar formants[3] = {voice_rng.uniform(350.0, 900.0), voice_rng.uniform(1000.0, 2400.0),
                                voice_rng.uniform(2600.0, 3800.0)};
    const Scalar widths[3] = {voice_rng.uniform(80.0, 160.0), voice_rng.uniform(100.0, 220.0),
                              voice_rng.uniform(150.0, 300.0)};
    const Scalar tilt = voice_rng.uniform(0.3, 0.8);

    for (int u = 0; u < utts_per_speaker; ++u) {
      Rng rng(derive_seed(seed, "utt/" + std::to_string(s) + "/" + std::to_string(u)));
      const Scalar jitter = 1.0 + rng.uniform(-0.02, 0.02);
      const Scalar am_rate = rng.uniform(1.0, 3.0);
      const Scalar am_phase = rng.uniform(0.0, 2.0 * M_PI);
      const Scalar pitch = f0 * jitter;

      std::vector<Scalar> wave(static_cast<std::size_t>(n), 0.0);
      const Scalar nyq_guard = 0.475 * sample_rate;
      for (int k = 1; k * pitch < nyq_guard; ++k) {
        const Scalar fk = k * pitch;
        Scalar env = 0.05;
        for (int m = 0; m < 3; ++m) {
          const Scalar d = (fk - formants[m]) / widths[m];
          env += std::exp(-0.5 * d * d);
        }
        const Scalar amp = env / std::pow(static_cast<Scalar>(k), tilt);
        const Scalar phase = rng.uniform(0.0, 2.0 * M_PI);
        const Scalar w = 2.0 * M_PI * fk / sample_rate;
        for (int i = 0; i < n; ++i) wave[static_cast<std::size_t>(i)] += amp * std::sin(w * i + phase);
      }
      // amplitude modulation + noise floor
      Scalar peak = 1e-9;
      for (int i = 0; i < n; ++i) {
        const Scalar t = static_cast<Scalar>(i) / sample_rate;
        wave[static_cast<std::size_t>(i)] *= 0.8 + 0.2 * std::sin(2.0 * M_PI * am_rate * t + am_phase);
        wave[static_cast<std::size_t>(i)] += 0.01 * rng.normal();
        peak = std::max(peak, std::abs(wave[static_cast<std::size_t>(i)]));
      }
      const Scalar gain = 0.5 / peak;
      for (Scalar& x : wave) x *= gain;
      quantize_waveform(wave);

      char id[32];
      std::snprintf(id, sizeof(id), "spk%03d_utt%03d", s, u);
      corpus.push_back(Utterance{id, s, std::move(wave), sample_rate});
    }
  }
  return corpus;
}

// ------------------------------- splitting ---------------------------------

// Per-speaker ratio split: floor(ratio*n) utterances into the first part,
// with at least one utterance on each side whenever the speaker has >= 2.
inline std::pair<Corpus, Corpus> split_per_speaker(const Corpus& corpus, Scalar ratio, std::uint64_t seed) {
  if (corpus.empty()) throw DataError("split_per_speaker: empty corpus");
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("split_per_speaker: ratio must be in (0,1)");

  std::map<int, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_speaker[corpus[i].speaker_id].push_back(i);

  Corpus a, b;
  for (auto& [spk, idx] : by_speaker) {
    Rng rng(derive_seed(seed, "split/" + std::to_string(spk)));
    rng.shuffle(idx);
    const std::size_t n = idx.size();
    std::size_t na = static_cast<std::size_t>(std::floor(ratio * static_cast<Scalar>(n)));
    if (n >= 2) na = std::clamp<std::size_t>(na, 1, n - 1);
    for (std::size_t i = 0; i < n; ++i) (i < na ? a : b).push_back(corpus[idx[i]]);
  }
  auto by_id = [](const Utterance& x, const Utterance& y) { return x.id < y.id; };
  std::sort(a.begin(), a.end(), by_id);
  std::sort(b.begin(), b.end(), by_id);
  return {std::move(a), std::move(b)};
}

// ------------------------------ corpus on disk ------------------------------

// Layout: <dir>/audio/<utt_id>.wav plus <dir>/labels.csv with columns
// utt_id,speaker_id,path (path relative to the csv).
inline void save_corpus(const Corpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir + "/audio");
  std::ofstream csv(dir + "/labels.csv");
  if (!csv) throw DependencyError("cannot write " + dir + "/labels.csv");
  csv << "utt_id,speaker_id,path\n";
  for (const auto& utt : corpus) {
    const std::string rel = "audio/" + utt.id + ".wav";
    write_wav(dir + "/" + rel, utt.waveform, utt.sample_rate);
    csv << utt.id << "," << utt.speaker_id << "," << rel << "\n";
  }
}

// Ingests any WAV tree via a labels csv (header: utt_id,speaker_id,path).
inline Corpus load_corpus_csv(const std::string& csv_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw DependencyError("missing corpus csv: " + csv_path);
  const std::string base = std::filesystem::path(csv_path).parent_path().string();

  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("utt_id", 0) == 0) continue;
    std::istringstream ss(line);
    std::string id, spk, path;
    if (!std::getline(ss, id, ',') || !std::getline(ss, spk, ',') || !std::getline(ss, path))
      throw ParseError("corpus csv line " + std::to_string(line_no) + ": expected utt_id,speaker_id,path");
    int speaker = 0;
    try {
      speaker = std::stoi(spk);
    } catch (...) {
      throw ParseError("corpus csv line " + std::to_string(line_no) + ": bad speaker_id '" + spk + "'");
    }
    WavData wav = read_wav(base.empty() ? path : base + "/" + path);
    corpus.push_back(Utterance{id, speaker, std::move(wav.samples), wav.sample_rate});
  }
  if (corpus.empty()) throw DataError("corpus csv has no records: " + csv_path);
  std::sort(corpus.begin(), corpus.end(), [](const Utterance& x, const Utterance& y) { return x.id < y.id; });
  return corpus;
}

inline std::uint64_t corpus_checksum(const Corpus& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& utt : corpus) {
    h = fnv1a(utt.id, h);
    h = fnv1a(utt.waveform.data(), utt.waveform.size() * sizeof(Scalar), h);
  }
  return h;
}

}  // namespace advsig

#endif  // ADVSIG_CORPUS_HPP
