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

#ifndef SEGAGG_THREAD_POOL_HPP_
#define SEGAGG_THREAD_POOL_HPP_

#include <cstdint>
#include <functional>

namespace segagg {

// Number of worker threads used by parallel_for. 0 selects the hardware
// concurrency. Results are bit-identical for every thread count: work is
// partitioned into disjoint contiguous index ranges and each output element
// is computed by exactly one thread in an order independent of the split.
void set_num_threads(int n);
int num_threads();

// Runs fn(begin, end) over disjoint chunks covering [0, n). Falls back to a
// single inline call when n < min_parallel or only one thread is configured.
void parallel_for(int64_t n, int64_t min_parallel,
                  const std::function<void(int64_t, int64_t)>& fn);

}  // namespace segagg

#endif  // SEGAGG_THREAD_POOL_HPP_
