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

#include "segagg/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "segagg/ops.hpp"

namespace segagg {

SegmentSpec make_segment_spec(int64_t segment_length, double overlap_fraction) {
  if (segment_length < 1) {
    throw std::invalid_argument("segment spec: segment length must be >= 1");
  }
  if (overlap_fraction < 0.0 || overlap_fraction >= 1.0) {
    throw std::invalid_argument("segment spec: overlap fraction must be in [0, 1)");
  }
  SegmentSpec spec;
  spec.segment_length = segment_length;
  spec.overlap = static_cast<int64_t>(
      std::llround(overlap_fraction * static_cast<double>(segment_length)));
  if (spec.hop() < 1) {
    throw std::invalid_argument("segment spec: hop must be >= 1");
  }
  return spec;
}

int64_t segment_count(int64_t source, const SegmentSpec& spec) {
  if (source <= spec.segment_length) return 1;
  const int64_t span = source - spec.segment_length;
  return (span + spec.hop() - 1) / spec.hop() + 1;
}

SegmentSet segment(std::span<const double> x, const SegmentSpec& spec) {
  const int64_t source = static_cast<int64_t>(x.size());
  if (source < 1) throw std::invalid_argument("segment: empty input");
  if (spec.segment_length < 1) {
    throw std::invalid_argument("segment: segment length must be >= 1");
  }
  if (spec.hop() < 1) throw std::invalid_argument("segment: hop must be >= 1");

  SegmentSet set;
  set.source_length = source;
  const int64_t c = spec.segment_length;

  if (source <= c) {
    std::vector<double> seg(c, 0.0);
    std::copy(x.begin(), x.end(), seg.begin());
    set.segments.push_back(std::move(seg));
    set.starts.push_back(0);
    return set;
  }

  const int64_t k = segment_count(source, spec);
  set.segments.reserve(k);
  set.starts.reserve(k);
  for (int64_t i = 0; i < k; ++i) {
    // Last segment is end-anchored so the tail is never dropped.
    const int64_t start = i == k - 1 ? source - c : i * spec.hop();
    set.starts.push_back(start);
    set.segments.emplace_back(x.begin() + start, x.begin() + start + c);
  }
  return set;
}

Tensor aggregate(const std::vector<Tensor>& embeddings) {
  if (embeddings.empty()) {
    throw std::invalid_argument("aggregate: needs at least one embedding");
  }
  for (const Tensor& e : embeddings) {
    if (e.shape() != embeddings.front().shape()) {
      throw std::invalid_argument("aggregate: embedding shape mismatch");
    }
  }
  Tensor total = embeddings.front();
  for (size_t i = 1; i < embeddings.size(); ++i) total = add(total, embeddings[i]);
  return scale(total, 1.0 / static_cast<double>(embeddings.size()));
}

int64_t draw_segment_length(const SegmentLengthPolicy& policy, int64_t factor,
                            Rng& rng) {
  if (factor < 1) throw std::invalid_argument("draw_segment_length: factor must be >= 1");
  auto round_valid = [factor](int64_t raw) {
    const int64_t rounded = (raw / factor) * factor;
    return rounded >= factor ? rounded : factor;
  };
  if (policy.kind == SegmentLengthPolicy::Kind::kFixed) {
    if (policy.fixed_length < factor) {
      throw std::invalid_argument(
          "draw_segment_length: fixed length is below the model's "
          "downsampling factor");
    }
    return round_valid(policy.fixed_length);
  }
  if (policy.min_length > policy.max_length) {
    throw std::invalid_argument("draw_segment_length: min must be <= max");
  }
  if (policy.max_length < factor) {
    throw std::invalid_argument(
        "draw_segment_length: range contains no valid multiple of the "
        "downsampling factor");
  }
  const int64_t raw = rng.uniform_int(policy.min_length, policy.max_length);
  return round_valid(raw);
}

}  // namespace segagg
