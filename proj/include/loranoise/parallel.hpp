// Copyright (c) 2026 The loranoise Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace loranoise {

// Runs fn(lo, hi) over a contiguous partition of [0, n) on `threads`
// workers. Chunk boundaries depend only on (n, threads), never on timing.
// Callers that want results independent of `threads` must make each index
// self-contained (own RNG substream, own output slot) and combine outputs
// with an order-fixed reduction.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    if (n > 0) fn(std::size_t{0}, n);
    return;
  }
  if (threads > n) threads = n;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t base = n / threads, extra = n % threads;
  std::size_t lo = 0;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t hi = lo + base + (t < extra ? 1 : 0);
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    lo = hi;
  }
  for (auto& worker : pool) worker.join();
}

}  // namespace loranoise
