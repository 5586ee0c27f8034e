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

#ifndef SEGAGG_CORPUS_HPP_
#define SEGAGG_CORPUS_HPP_

#include <string>
#include <vector>

#include "segagg/synthdata.hpp"

namespace segagg {

struct LoadedUtterance {
  int speaker_id = 0;
  // Class index within the training split, -1 outside it.
  int64_t label = -1;
  std::string relative_path;
  std::vector<double> samples;
};

// Whole corpus resident in memory; desk-scale corpora are a few dozen MB.
struct LoadedCorpus {
  int sample_rate = 0;
  int64_t num_train_speakers = 0;
  std::vector<LoadedUtterance> train;
  std::vector<LoadedUtterance> validation;
  std::vector<LoadedUtterance> test;
};

// Reads manifest.txt under `corpus_dir` and loads every waveform, assigning
// training labels 0..I-1 in speaker-id order.
LoadedCorpus load_corpus(const std::string& corpus_dir);

}  // namespace segagg

#endif  // SEGAGG_CORPUS_HPP_
