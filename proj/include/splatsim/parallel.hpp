#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace splatsim {

/// Environment variable read by the CLI to pin the worker thread count.
inline constexpr const char* kThreadsEnvVar = "SPLATSIM_NUM_THREADS";

inline void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

inline int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Applies SPLATSIM_NUM_THREADS if set. Returns the effective thread count.
inline int configure_threads_from_env() {
  if (const char* v = std::getenv(kThreadsEnvVar)) {
    try {
      set_num_threads(std::stoi(v));
    } catch (...) {
    }
  }
  return num_threads();
}

/// Static-schedule parallel loop over [0, n). Each index is visited exactly
/// once; callers must only write to index-private state.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) fn(i);
}

}  // namespace splatsim
