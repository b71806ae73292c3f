#pragma once

#include <cstddef>
#include <functional>

namespace amip {

// Worker count: AMIP_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
unsigned thread_count();

// Calls body(begin, end) on disjoint contiguous chunks covering [0, n). Runs
// inline when n is small or one thread is configured. The first exception
// thrown by any chunk is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t begin, std::size_t end)>& body,
                  std::size_t min_chunk = 1);

}  // namespace amip
