#pragma once

#include <cstddef>
#include <cstdint>

namespace evo {

/// Serial is the reference path: fixed iteration order, single thread.
/// Parallel spreads independent particles over OpenMP threads; because each
/// particle owns its random stream both paths produce identical bits.
enum class ExecPolicy { Serial, Parallel };

template <class Body>
void for_each_particle(ExecPolicy policy, std::size_t n, Body&& body) {
#if defined(EVO_HAVE_OPENMP)
    if (policy == ExecPolicy::Parallel) {
        const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
        return;
    }
#else
    (void)policy;
#endif
    for (std::size_t i = 0; i < n; ++i) body(i);
}

bool openmp_enabled();
int max_threads();

}  // namespace evo
