#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace migate {

// Worker cap: MIGATE_THREADS when set, otherwise hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("MIGATE_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// Runs fn(worker_index, begin, end) over contiguous chunks of [0, n).
// Results that are merged in worker-index order are independent of the
// worker count.
template <typename Fn>
void parallel_chunks(size_t n, const Fn& fn) {
  int workers = worker_count();
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    fn(0, size_t{0}, n);
    return;
  }
  size_t w = std::min<size_t>(static_cast<size_t>(workers), n);
  std::vector<std::thread> pool;
  pool.reserve(w);
  size_t chunk = (n + w - 1) / w;
  for (size_t t = 0; t < w; ++t) {
    size_t begin = t * chunk;
    size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, t, begin, end] { fn(static_cast<int>(t), begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace migate
