#ifndef NECO_PARALLEL_HPP
#define NECO_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace neco {

inline int default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs body(i) for i in [0, n) on up to `jobs` threads. Results must be
// written to per-index slots so output order never depends on scheduling.
// The first exception thrown by any body is rethrown after all threads join.
template <class Body>
void parallel_for(int n, int jobs, Body&& body) {
  jobs = std::clamp(jobs, 1, std::max(1, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace neco

#endif  // NECO_PARALLEL_HPP
