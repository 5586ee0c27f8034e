// Copyright (c) 2026 segagg authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "segagg/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "segagg/binary_io.hpp"

namespace segagg {
namespace {

constexpr double kTwoPi = 6.28318530717958647692;
constexpr double kPeakLevel = 0.9;
constexpr double kJitterFraction = 0.03;

constexpr uint64_t kSpeakerStream = 0x73706b72ULL;    // "spkr"
constexpr uint64_t kUtteranceStream = 0x75747472ULL;  // "uttr"
constexpr uint64_t kDurationStream = 0x64757261ULL;   // "dura"

}  // namespace

Split CorpusManifest::split_of(int speaker_id) const {
  if (speaker_id < train_speakers) return Split::kTrain;
  if (speaker_id < train_speakers + val_speakers) return Split::kValidation;
  return Split::kTest;
}

SpeakerProfile make_speaker(uint64_t master_seed, int speaker_id,
                            const VoiceConfig& config) {
  if (config.f0_min <= 0.0 || config.f0_max < config.f0_min) {
    throw std::invalid_argument("make_speaker: invalid f0 range");
  }
  if (config.harmonics < 1) {
    throw std::invalid_argument("make_speaker: needs >= 1 harmonic");
  }
  Rng rng = Rng(master_seed).fork(kSpeakerStream, static_cast<uint64_t>(speaker_id));
  SpeakerProfile profile;
  profile.speaker_id = speaker_id;
  profile.f0 = rng.uniform(config.f0_min, config.f0_max);
  profile.harmonic_weights.resize(config.harmonics);
  for (int h = 0; h < config.harmonics; ++h) {
    // Positive weights with a decaying envelope; every harmonic contributes.
    profile.harmonic_weights[h] = rng.uniform(0.05, 1.0) / (1.0 + 0.5 * h);
  }
  profile.noise_floor = rng.uniform(config.noise_min, config.noise_max);
  return profile;
}

Waveform synth_utterance(const SpeakerProfile& profile, uint64_t utterance_seed,
                         int64_t duration_samples, int sample_rate) {
  if (duration_samples < 1) {
    throw std::invalid_argument("synth_utterance: duration must be >= 1");
  }
  if (sample_rate < 1) {
    throw std::invalid_argument("synth_utterance: sample rate must be >= 1");
  }
  Rng rng = Rng(utterance_seed)
                .fork(kUtteranceStream, static_cast<uint64_t>(profile.speaker_id));
  const double jitter = rng.uniform(-kJitterFraction, kJitterFraction);
  const double f0 = profile.f0 * (1.0 + jitter);
  const int harmonics = static_cast<int>(profile.harmonic_weights.size());
  std::vector<double> phases(harmonics);
  for (double& phi : phases) phi = rng.uniform(0.0, kTwoPi);

  Waveform wave;
  wave.sample_rate = sample_rate;
  wave.samples.assign(duration_samples, 0.0);
  for (int h = 0; h < harmonics; ++h) {
    const double w = profile.harmonic_weights[h];
    const double omega = kTwoPi * (h + 1) * f0 / sample_rate;
    const double phi = phases[h];
    for (int64_t t = 0; t < duration_samples; ++t) {
      wave.samples[t] += w * std::sin(omega * t + phi);
    }
  }
  if (profile.noise_floor > 0.0) {
    for (double& s : wave.samples) s += profile.noise_floor * rng.normal();
  }

  double peak = 0.0;
  for (double s : wave.samples) peak = std::max(peak, std::fabs(s));
  if (peak > 0.0) {
    const double gain = kPeakLevel / peak;
    for (double& s : wave.samples) s *= gain;
  }
  return wave;
}

CorpusManifest generate_corpus(const CorpusConfig& config) {
  if (config.train_speakers < 1 || config.val_speakers < 0 ||
      config.test_speakers < 0) {
    throw std::invalid_argument("generate_corpus: invalid speaker counts");
  }
  if (config.utterances_per_speaker < 1) {
    throw std::invalid_argument("generate_corpus: needs >= 1 utterance per speaker");
  }
  if (config.duration_min < 1 || config.duration_max < config.duration_min) {
    throw std::invalid_argument("generate_corpus: invalid duration range");
  }

  namespace fs = std::filesystem;
  const fs::path root(config.output_dir);
  std::error_code ec;
  fs::create_directories(root / "waves", ec);
  if (ec) {
    throw std::runtime_error("generate_corpus: cannot create output directory " +
                             root.string() + ": " + ec.message());
  }

  CorpusManifest manifest;
  manifest.master_seed = config.master_seed;
  manifest.sample_rate = config.sample_rate;
  manifest.train_speakers = config.train_speakers;
  manifest.val_speakers = config.val_speakers;
  manifest.test_speakers = config.test_speakers;
  manifest.utterances_per_speaker = config.utterances_per_speaker;

  const int total = manifest.total_speakers();
  for (int speaker = 0; speaker < total; ++speaker) {
    const SpeakerProfile profile =
        make_speaker(config.master_seed, speaker, config.voice);
    const fs::path speaker_dir =
        root / "waves" / ("spk" + std::to_string(speaker));
    fs::create_directories(speaker_dir, ec);
    if (ec) {
      throw std::runtime_error("generate_corpus: cannot create " +
                               speaker_dir.string());
    }
    for (int u = 0; u < config.utterances_per_speaker; ++u) {
      Rng utt_rng = Rng(config.master_seed)
                        .fork(kDurationStream,
                              static_cast<uint64_t>(speaker) * 1000003ULL + u);
      const uint64_t utterance_seed = utt_rng.next_u64();
      const int64_t duration =
          utt_rng.uniform_int(config.duration_min, config.duration_max);
      const Waveform wave =
          synth_utterance(profile, utterance_seed, duration, config.sample_rate);

      char name[32];
      std::snprintf(name, sizeof(name), "utt%03d.rawf", u);
      const fs::path file = speaker_dir / name;
      save_waveform(wave, file.string());

      ManifestEntry entry;
      entry.speaker_id = speaker;
      entry.utterance_seed = utterance_seed;
      entry.duration = duration;
      entry.relative_path =
          (fs::path("waves") / ("spk" + std::to_string(speaker)) / name).generic_string();
      manifest.entries.push_back(std::move(entry));
    }
  }

  save_manifest(manifest, (root / "manifest.txt").string());
  return manifest;
}

void save_manifest(const CorpusManifest& manifest, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_manifest: cannot open " + path);
  os << "# master_seed " << manifest.master_seed << "\n";
  os << "# sample_rate " << manifest.sample_rate << "\n";
  os << "# speakers " << manifest.train_speakers << " " << manifest.val_speakers
     << " " << manifest.test_speakers << "\n";
  os << "# utterances_per_speaker " << manifest.utterances_per_speaker << "\n";
  for (const ManifestEntry& e : manifest.entries) {
    os << e.speaker_id << " " << e.utterance_seed << " " << e.duration << " "
       << e.relative_path << "\n";
  }
  if (!os) throw std::runtime_error("save_manifest: write failed for " + path);
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_manifest: cannot open " + path);
  CorpusManifest manifest;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "master_seed") ls >> manifest.master_seed;
      else if (key == "sample_rate") ls >> manifest.sample_rate;
      else if (key == "speakers")
        ls >> manifest.train_speakers >> manifest.val_speakers >>
            manifest.test_speakers;
      else if (key == "utterances_per_speaker")
        ls >> manifest.utterances_per_speaker;
      continue;
    }
    ManifestEntry e;
    if (!(ls >> e.speaker_id >> e.utterance_seed >> e.duration >>
          e.relative_path)) {
      throw std::runtime_error("load_manifest: malformed record: " + line);
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void save_waveform(const Waveform& wave, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_waveform: cannot open " + path);
  os.write("RAWF", 4);
  write_le<uint32_t>(os, static_cast<uint32_t>(wave.sample_rate));
  write_le<uint64_t>(os, static_cast<uint64_t>(wave.samples.size()));
  for (double s : wave.samples) write_le<float>(os, static_cast<float>(s));
  if (!os) throw std::runtime_error("save_waveform: write failed for " + path);
}

Waveform load_waveform(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_waveform: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string_view(magic, 4) != "RAWF") {
    throw std::runtime_error("load_waveform: bad magic in " + path);
  }
  Waveform wave;
  wave.sample_rate = static_cast<int>(read_le<uint32_t>(is));
  const uint64_t count = read_le<uint64_t>(is);
  wave.samples.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    wave.samples[i] = static_cast<double>(read_le<float>(is));
  }
  return wave;
}

}  // namespace segagg
