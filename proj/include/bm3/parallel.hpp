#pragma once

#include <cstddef>
#include <functional>

namespace bm3 {

/// Worker count: BM3_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
/// so callers that write only their own rows need no synchronization.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_chunk = 256);

}  // namespace bm3
