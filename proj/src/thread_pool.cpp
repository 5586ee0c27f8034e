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

#include "segagg/thread_pool.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace segagg {
namespace {

#if defined(__GLIBC__)
// Activation buffers are large enough to hit glibc's mmap threshold, and
// graph teardown would unmap them every step. Keeping them on the heap cuts
// the kernel time of a training step substantially.
const bool g_malloc_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  return true;
}();
#endif

int g_requested_threads = 0;

int resolve_threads() {
  if (g_requested_threads > 0) return g_requested_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Persistent workers with statically partitioned ranges. Worker i always
// computes the (i+1)-th contiguous slice of [0, n) and the calling thread
// computes slice 0, so the element-to-thread assignment never depends on
// scheduling, and every job field is read under the mutex.
class Pool {
 public:
  explicit Pool(int helpers) {
    threads_.reserve(helpers);
    for (int i = 0; i < helpers; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    const int parts = static_cast<int>(threads_.size()) + 1;
    const int64_t chunk = (n + parts - 1) / parts;
    {
      std::lock_guard<std::mutex> lock(mu_);
      fn_ = &fn;
      total_ = n;
      chunk_ = chunk;
      finished_ = 0;
      ++generation_;
    }
    wake_.notify_all();
    fn(0, std::min(chunk, n));
    std::unique_lock<std::mutex> lock(mu_);
    done_.wait(lock,
               [this] { return finished_ == static_cast<int>(threads_.size()); });
    fn_ = nullptr;
  }

 private:
  void worker_loop(int index) {
    uint64_t seen = 0;
    while (true) {
      const std::function<void(int64_t, int64_t)>* fn = nullptr;
      int64_t begin = 0;
      int64_t end = 0;
      {
        std::unique_lock<std::mutex> lock(mu_);
        wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        fn = fn_;
        begin = std::min<int64_t>((index + 1) * chunk_, total_);
        end = std::min<int64_t>(begin + chunk_, total_);
      }
      if (begin < end) (*fn)(begin, end);
      {
        std::lock_guard<std::mutex> lock(mu_);
        ++finished_;
      }
      done_.notify_all();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(int64_t, int64_t)>* fn_ = nullptr;
  int64_t total_ = 0;
  int64_t chunk_ = 1;
  int finished_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool* pool_instance(int helpers) {
  static Pool* pool = new Pool(helpers);
  return pool;
}

}  // namespace

void set_num_threads(int n) { g_requested_threads = n < 0 ? 0 : n; }

int num_threads() { return resolve_threads(); }

void parallel_for(int64_t n, int64_t min_parallel,
                  const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int threads = resolve_threads();
  if (threads <= 1 || n < min_parallel || n == 1) {
    fn(0, n);
    return;
  }
  // The pool size is fixed on first use; later set_num_threads(1) still
  // short-circuits above.
  pool_instance(threads - 1)->run(n, fn);
}

}  // namespace segagg
