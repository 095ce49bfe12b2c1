#pragma once

#include <cstddef>
#include <functional>

namespace cagnet {

// Worker count: min(hardware_concurrency, CAGNET_THREADS if set).
// A value of 1 runs everything inline on the caller.
int thread_budget();

// Splits [0, n) into contiguous chunks, one per worker. Results that are
// written per-index are deterministic regardless of the budget; reductions
// must be done per-chunk and combined in chunk order by the caller.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& chunk);

}  // namespace cagnet
