#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace persuade {

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// (by index) is rethrown after all threads join, so failure behavior does not
// depend on scheduling.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t thread_count =
      std::min<std::size_t>(n, workers < 1 ? 1 : static_cast<std::size_t>(workers));
  if (thread_count <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  threads.reserve(thread_count);
  for (std::size_t t = 0; t < thread_count; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& thread : threads) thread.join();
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
}

}  // namespace persuade
