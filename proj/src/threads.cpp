#include "opo/threads.hpp"

#include <cstdlib>
#include <thread>
#include <vector>

namespace opo::threads {

int resolve(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("OPO_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

void parallel_for(std::int64_t n, int workers,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  workers = std::max(1, workers);
  if (workers == 1 || n < 2 * workers) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace opo::threads
