#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wavesel {

// Kernels that have an OpenMP version keep a plain loop alongside it; tests check that
// both produce the same numbers and the benchmark target compares their speed.
enum class Execution { kSerial, kParallel };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace wavesel
