// Copyright 2026 The ctcst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ctcst {

// Worker count comes from CTCST_THREADS; defaults to the hardware count.
inline int thread_count() {
  static const int count = [] {
    if (const char* env = std::getenv("CTCST_THREADS")) {
      const int n = std::atoi(env);
      if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw >= 1 ? static_cast<int>(hw) : 1;
  }();
  return count;
}

// Maps fn over [0, n) storing results by index, so the output is identical
// for any worker count. fn must be safe to call concurrently.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(int n, Fn&& fn) {
  std::vector<Result> results(static_cast<std::size_t>(n));
  const int workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }
  std::atomic<int> cursor{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = cursor.fetch_add(1); i < n; i = cursor.fetch_add(1)) results[i] = fn(i);
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace ctcst
