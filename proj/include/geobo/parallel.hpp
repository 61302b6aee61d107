#pragma once

#include <cstdint>

#include <omp.h>

namespace geobo {

// Execution mode for the data-parallel kernels. Every parallel kernel has a
// serial twin with identical per-element arithmetic, so results match exactly.
enum class Exec { serial, parallel };

template <typename F>
void par_for(Exec mode, std::int64_t n, F&& body) {
    if (mode == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) body(i);
    } else {
        for (std::int64_t i = 0; i < n; ++i) body(i);
    }
}

template <typename F>
void par_for_dynamic(Exec mode, std::int64_t n, F&& body) {
    if (mode == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < n; ++i) body(i);
    } else {
        for (std::int64_t i = 0; i < n; ++i) body(i);
    }
}

}  // namespace geobo
