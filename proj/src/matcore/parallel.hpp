#pragma once

#include <cstddef>

namespace graphsync::detail {

// Entering an OpenMP region costs microseconds even with a false if-clause,
// which dominates on the small matrices iterative callers pass around.
template <class Body>
void for_index(std::size_t count, bool parallel, Body&& body) {
    if (!parallel) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    const long total = static_cast<long>(count);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < total; ++i) body(static_cast<std::size_t>(i));
}

}  // namespace graphsync::detail
