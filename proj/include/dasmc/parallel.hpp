#ifndef DASMC_PARALLEL_HPP
#define DASMC_PARALLEL_HPP

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace dasmc {

/// Runs fn(i) for i in [0, n) across num_threads threads with a static
/// partition. Callers write results into per-index slots, so the outcome is
/// identical for every thread count.
template <typename Fn>
void parallel_for(Eigen::Index n, int num_threads, Fn&& fn) {
  if (n <= 0) return;
  if (num_threads <= 1 || n == 1) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  const auto workers = static_cast<Eigen::Index>(num_threads) < n
                           ? static_cast<Eigen::Index>(num_threads)
                           : n;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (Eigen::Index t = 0; t < workers; ++t) {
    const Eigen::Index lo = n * t / workers;
    const Eigen::Index hi = n * (t + 1) / workers;
    pool.emplace_back([lo, hi, &fn, &first_error, &error_mutex] {
      try {
        for (Eigen::Index i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dasmc

#endif  // DASMC_PARALLEL_HPP
