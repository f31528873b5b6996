#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace kgalign {

/// Runs fn(begin, end) over disjoint chunks of [0, n) on up to `workers`
/// threads. Chunks are fixed by (n, workers) alone, so output written to
/// disjoint ranges stays deterministic.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers <= 1 || n <= 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace kgalign
