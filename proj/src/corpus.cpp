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

#include "segagg/corpus.hpp"

#include <filesystem>
#include <stdexcept>

namespace segagg {

LoadedCorpus load_corpus(const std::string& corpus_dir) {
  namespace fs = std::filesystem;
  const fs::path root(corpus_dir);
  const fs::path manifest_path = root / "manifest.txt";
  if (!fs::exists(manifest_path)) {
    throw std::runtime_error("load_corpus: no manifest at " +
                             manifest_path.string() +
                             " (generate the corpus first)");
  }
  const CorpusManifest manifest = load_manifest(manifest_path.string());

  LoadedCorpus corpus;
  corpus.sample_rate = manifest.sample_rate;
  corpus.num_train_speakers = manifest.train_speakers;
  for (const ManifestEntry& entry : manifest.entries) {
    LoadedUtterance utt;
    utt.speaker_id = entry.speaker_id;
    utt.relative_path = entry.relative_path;
    const Waveform wave = load_waveform((root / entry.relative_path).string());
    if (wave.sample_rate != manifest.sample_rate) {
      throw std::runtime_error("load_corpus: sample rate mismatch in " +
                               entry.relative_path);
    }
    utt.samples = std::move(wave.samples);
    switch (manifest.split_of(entry.speaker_id)) {
      case Split::kTrain:
        utt.label = entry.speaker_id;  // train ids start at 0
        corpus.train.push_back(std::move(utt));
        break;
      case Split::kValidation:
        corpus.validation.push_back(std::move(utt));
        break;
      case Split::kTest:
        corpus.test.push_back(std::move(utt));
        break;
    }
  }
  return corpus;
}

}  // namespace segagg
