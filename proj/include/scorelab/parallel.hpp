#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace scorelab {

/// Runs fn(i) for i in [0, count) on up to hardware_concurrency threads.
/// Work units must write only to their own slot; results are therefore
/// independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Number of fixed-size chunks covering `total` items. Chunking is fixed so MC
/// estimators are reproducible regardless of thread count.
inline constexpr std::size_t kMcChunk = 4096;
inline std::size_t chunk_count(std::size_t total) { return (total + kMcChunk - 1) / kMcChunk; }

}  // namespace scorelab
