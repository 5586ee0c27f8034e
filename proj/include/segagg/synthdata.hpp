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

#ifndef SEGAGG_SYNTHDATA_HPP_
#define SEGAGG_SYNTHDATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "segagg/rng.hpp"

namespace segagg {

// A mono waveform with its sample rate. Samples are peak-normalized to 0.9.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;
};

// Seeded parametric voice: a harmonic stack over a fundamental plus a noise
// floor. Stands in for a real speaker at desk scale.
struct SpeakerProfile {
  int speaker_id = 0;
  double f0 = 0.0;                        // Hz
  std::vector<double> harmonic_weights;   // spectral envelope, all > 0
  double noise_floor = 0.0;               // in [0, 0.5]
};

struct VoiceConfig {
  double f0_min = 80.0;
  double f0_max = 300.0;
  int harmonics = 8;
  double noise_min = 0.01;
  double noise_max = 0.12;
};

struct CorpusConfig {
  std::string output_dir;
  uint64_t master_seed = 1;
  int sample_rate = 4000;
  int train_speakers = 20;
  int val_speakers = 5;
  int test_speakers = 8;
  int utterances_per_speaker = 10;
  int64_t duration_min = 8000;   // samples
  int64_t duration_max = 16000;  // samples
  VoiceConfig voice;
};

struct ManifestEntry {
  int speaker_id = 0;
  uint64_t utterance_seed = 0;
  int64_t duration = 0;  // samples
  std::string relative_path;
};

enum class Split { kTrain, kValidation, kTest };

struct CorpusManifest {
  uint64_t master_seed = 0;
  int sample_rate = 0;
  int train_speakers = 0;
  int val_speakers = 0;
  int test_speakers = 0;
  int utterances_per_speaker = 0;
  std::vector<ManifestEntry> entries;

  int total_speakers() const {
    return train_speakers + val_speakers + test_speakers;
  }
  // Speaker ids are assigned contiguously: train, then validation, then test.
  Split split_of(int speaker_id) const;
};

// Deterministic speaker profile keyed by (master_seed, speaker_id).
SpeakerProfile make_speaker(uint64_t master_seed, int speaker_id,
                            const VoiceConfig& config);

// Deterministic utterance keyed by (profile, utterance_seed):
//   x[t] = peak_normalize(sum_h w_h * sin(2 pi h f0' t / sr + phi_h) + noise)
// with f0' jittered within +-3% per utterance, per-utterance random phases,
// and Gaussian noise scaled by the profile's noise floor.
Waveform synth_utterance(const SpeakerProfile& profile, uint64_t utterance_seed,
                         int64_t duration_samples, int sample_rate);

// Synthesizes the whole corpus to disk and writes the manifest. Regenerating
// with the same config produces byte-identical files.
CorpusManifest generate_corpus(const CorpusConfig& config);

// Manifest file: '#'-prefixed metadata lines followed by one record per
// line: "speaker_id utterance_seed duration relative_path".
void save_manifest(const CorpusManifest& manifest, const std::string& path);
CorpusManifest load_manifest(const std::string& path);

// Waveform container: magic "RAWF", u32 sample rate, u64 sample count,
// 32-bit IEEE-754 little-endian samples.
void save_waveform(const Waveform& wave, const std::string& path);
Waveform load_waveform(const std::string& path);

}  // namespace segagg

#endif  // SEGAGG_SYNTHDATA_HPP_
