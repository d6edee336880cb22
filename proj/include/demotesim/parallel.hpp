#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dsim {

// Runs f(i) for i in [0, n). Trials are independent (one machine each) and
// results are written by index, so the parallel and serial paths produce
// identical output; the serial path is the reference the tests compare
// against.
template <class F>
void run_trials(uint32_t n, bool parallel, uint32_t threads, F&& f) {
#ifdef _OPENMP
  if (parallel) {
    if (threads > 0) omp_set_num_threads(static_cast<int>(threads));
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
      f(static_cast<uint32_t>(i));
    }
    return;
  }
#else
  (void)parallel;
  (void)threads;
#endif
  for (uint32_t i = 0; i < n; ++i) f(i);
}

}  // namespace dsim
