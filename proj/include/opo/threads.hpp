#pragma once

#include <cstdint>
#include <functional>

namespace opo::threads {

// Worker count: explicit argument wins, then the OPO_THREADS environment
// variable, then 1. Results never depend on the count; only wall time does.
int resolve(int requested = 0);

// Splits [0, n) into contiguous chunks, one worker per chunk. Runs inline
// when workers == 1 or n is small.
void parallel_for(std::int64_t n, int workers,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

}  // namespace opo::threads
