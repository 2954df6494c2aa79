#pragma once

#include <cstddef>
#include <functional>

namespace tembed {

/// Worker count: hardware concurrency, capped by TRIPLET_EMBED_THREADS when set.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) across worker_count() threads.
///
/// Each index runs exactly once; callers write results into per-index slots
/// so that any subsequent reduction happens in index order. The first
/// exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace tembed
