#pragma once

#include <cstddef>
#include <functional>

namespace pushrel {

// Runs fn(i) for i in [0, n) over a small shared thread pool. Work is split
// into contiguous index ranges, so results never depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Same, but hands each worker a whole [begin, end) range.
void parallel_ranges(std::size_t n,
                     const std::function<void(std::size_t, std::size_t)>& fn);

int worker_count();

}  // namespace pushrel
