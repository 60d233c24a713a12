#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gsg {

// Thin OpenMP shims so kernels compile (serially) without OpenMP.
inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Reads GSGRASP_THREADS and applies it when set.
void apply_thread_env();

}  // namespace gsg
