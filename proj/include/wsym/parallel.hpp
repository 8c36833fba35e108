// Copyright (c) the wsym contributors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace wsym {

/// Thread count resolution: WSYM_THREADS env wins, then `requested`;
/// 0 means hardware concurrency.
inline int resolve_thread_count(int requested) {
  if (const char* env = std::getenv("WSYM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Static block partition; results must be written to disjoint slots so the
/// output is identical for any thread count.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n < 4) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int nt = std::min(threads, n);
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < nt; ++t) {
    const int lo = static_cast<int>(static_cast<long>(n) * t / nt);
    const int hi = static_cast<int>(static_cast<long>(n) * (t + 1) / nt);
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace wsym
