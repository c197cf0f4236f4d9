#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bestmat {

/// Runs body(k) for k in [0, count) on up to `threads` workers. Results must be
/// written to per-index slots; the first exception is rethrown.
inline void parallel_for(int count, int threads, const std::function<void(int)> &body) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int k = 0; k < count; ++k) body(k);
    return;
  }
  std::mutex mutex;
  std::exception_ptr error;
  int next = 0;
  auto worker = [&] {
    for (;;) {
      int k;
      {
        std::lock_guard<std::mutex> lock(mutex);
        if (error || next >= count) return;
        k = next++;
      }
      try {
        body(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto &t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bestmat
