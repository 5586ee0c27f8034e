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

#ifndef SEGAGG_SEGMENTATION_HPP_
#define SEGAGG_SEGMENTATION_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "segagg/rng.hpp"
#include "segagg/tensor.hpp"

namespace segagg {

// Resolved segmentation geometry: segment length and overlap in samples.
struct SegmentSpec {
  int64_t segment_length = 0;
  int64_t overlap = 0;

  int64_t hop() const { return segment_length - overlap; }
};

// Builds a spec with overlap = round(overlap_fraction * segment_length).
SegmentSpec make_segment_spec(int64_t segment_length, double overlap_fraction);

// The K overlapping segments of one utterance, each segment_length samples.
struct SegmentSet {
  std::vector<std::vector<double>> segments;
  std::vector<int64_t> starts;
  int64_t source_length = 0;

  int64_t count() const { return static_cast<int64_t>(segments.size()); }
};

// Splits x into overlapping segments. Inputs no longer than one segment
// yield a single zero-padded segment; otherwise starts advance by hop and
// the final segment is anchored to end exactly at the input's end, so no
// samples are discarded.
SegmentSet segment(std::span<const double> x, const SegmentSpec& spec);

// Number of segments segment() produces for an input of length `source`.
int64_t segment_count(int64_t source, const SegmentSpec& spec);

// Element-wise mean of K same-shape embeddings (any K >= 1). Differentiable:
// each input receives 1/K of the output gradient.
Tensor aggregate(const std::vector<Tensor>& embeddings);

// Per-mini-batch segment length policy.
struct SegmentLengthPolicy {
  enum class Kind { kFixed, kPerBatchRandom };
  Kind kind = Kind::kFixed;
  int64_t fixed_length = 0;
  int64_t min_length = 0;
  int64_t max_length = 0;
};

// Draws one segment length for a mini-batch: uniform in [min, max], rounded
// down to a multiple of `factor` so the drawn length is valid for the model
// (draws below `factor` round up to it). Throws when no multiple of `factor`
// lies in range. Fixed policies return the fixed length rounded the same way.
int64_t draw_segment_length(const SegmentLengthPolicy& policy, int64_t factor,
                            Rng& rng);

}  // namespace segagg

#endif  // SEGAGG_SEGMENTATION_HPP_
