#pragma once

#include <cstddef>
#include <functional>

namespace rail {

// Worker count from RAIL_THREADS, falling back to the hardware concurrency.
int thread_count();

// Runs body(i) for i in [0, n) on up to `threads` workers. Exceptions from
// the body are rethrown on the calling thread (the first by index wins).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace rail
