#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fracsphere {

namespace detail {
inline std::atomic<int>& worker_setting() {
  static std::atomic<int> setting{0};
  return setting;
}
}  // namespace detail

/// Number of worker threads used by the pair sums. Zero selects the number of
/// logical cores.
inline void set_workers(int count) { detail::worker_setting() = std::max(0, count); }

inline int workers() {
  const int w = detail::worker_setting();
  if (w > 0) return w;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Calls body(i) for every i in [0, n) exactly once, spread over contiguous
/// chunks. Bodies must only write to per-index state.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers()), n);
  if (w <= 1 || n < 32) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(w);
    for (std::size_t k = 0; k < w; ++k) {
      const std::size_t lo = n * k / w;
      const std::size_t hi = n * (k + 1) / w;
      pool.emplace_back([&, lo, hi] {
        try {
          for (std::size_t i = lo; i < hi; ++i) body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Sum of partial(i) over i in [0, n). Partials are evaluated in parallel and
/// then added in index order, so the result does not depend on the worker
/// count.
template <class Partial>
double ordered_sum(std::size_t n, Partial&& partial) {
  std::vector<double> parts(n, 0.0);
  parallel_for(n, [&](std::size_t i) { parts[i] = partial(i); });
  double total = 0.0;
  for (double v : parts) total += v;
  return total;
}

}  // namespace fracsphere
