#pragma once

#include <omp.h>

namespace dymapia {

// Global job count for the OpenMP kernels. Default 1: single-threaded runs
// are the reproducibility baseline. All reductions in the library accumulate
// partials in a fixed index order, so results are bit-identical for any job
// count; this only controls how much hardware gets used.
inline void set_jobs(int n) {
    if (n < 1) n = 1;
    omp_set_num_threads(n);
}

inline int jobs() { return omp_get_max_threads(); }

}  // namespace dymapia
