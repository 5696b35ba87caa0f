#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace selrec {

// Maps the user-facing thread-count convention (0 = use all available)
// to a concrete positive count.
inline int resolve_threads(int requested) {
#ifdef _OPENMP
    if (requested <= 0) return omp_get_max_threads();
    return requested;
#else
    (void)requested;
    return 1;
#endif
}

}  // namespace selrec
