#pragma once

#include <cstdint>
#include <exception>
#include <type_traits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace harness {

/// Thread cap from HARNESS_LAB_THREADS (0 or unset: runtime default).
int thread_limit();

enum class Execution { serial, parallel };

/// Evaluates f(r) for r in [0, n) and returns the results in replica order.
/// Each replica owns its seed, so both execution modes return identical data;
/// reductions over the result happen afterwards, in order.
template <class F>
auto map_replicas(int n, F&& f, Execution mode = Execution::parallel)
    -> std::vector<std::invoke_result_t<F&, int>> {
  using R = std::invoke_result_t<F&, int>;
  std::vector<R> out(static_cast<std::size_t>(n > 0 ? n : 0));
  if (mode == Execution::serial) {
    for (int r = 0; r < n; ++r) out[static_cast<std::size_t>(r)] = f(r);
    return out;
  }
#ifdef _OPENMP
  const int threads = thread_limit();
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads) if (threads > 1)
  for (int r = 0; r < n; ++r) {
    try {
      out[static_cast<std::size_t>(r)] = f(r);
    } catch (...) {
#pragma omp critical(harness_replica_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
#else
  for (int r = 0; r < n; ++r) out[static_cast<std::size_t>(r)] = f(r);
#endif
  return out;
}

}  // namespace harness
