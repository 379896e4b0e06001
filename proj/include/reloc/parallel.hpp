#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace reloc {

// Static chunking over [0, n): thread t owns one contiguous range, so any
// writes to per-index slots land identically regardless of thread count.
// threads <= 1 runs inline.
inline void parallel_for(std::int64_t n, int threads,
                         const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) {
    return;
  }
  const std::int64_t workers = std::min<std::int64_t>(threads < 1 ? 1 : threads, n);
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::int64_t t = 0; t < workers; ++t) {
    const std::int64_t lo = n * t / workers;
    const std::int64_t hi = n * (t + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) {
        fn(i);
      }
    });
  }
  for (auto& th : pool) {
    th.join();
  }
}

}  // namespace reloc
