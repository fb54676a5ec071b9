#include "evo/parallel.hpp"

#if defined(EVO_HAVE_OPENMP)
#include <omp.h>
#endif

namespace evo {

bool openmp_enabled() {
#if defined(EVO_HAVE_OPENMP)
    return true;
#else
    return false;
#endif
}

int max_threads() {
#if defined(EVO_HAVE_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace evo
