#pragma once

#include <cstddef>
#include <functional>

namespace cogdiag {

/// Runs fn(i) for every i in [0, count) on up to `workers` threads.
/// fn must write its result to a per-index slot and take its randomness from
/// a sub-stream derived from i, so every worker count yields identical
/// results. The first exception thrown by fn is rethrown on the caller.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn);

/// 0 means "use hardware concurrency".
unsigned resolve_workers(unsigned requested);

}  // namespace cogdiag
