#pragma once

#include <cstddef>
#include <functional>

namespace tempora {

/// Number of worker threads to use when the caller asked for `requested`
/// (0 means: TEMPORA_THREADS if set, otherwise the number of logical cores).
unsigned resolve_threads(unsigned requested);

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items must be
/// independent; results that need combining should be written to per-item slots
/// and reduced by the caller in index order. The first exception thrown by any
/// item is rethrown on the calling thread.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace tempora
