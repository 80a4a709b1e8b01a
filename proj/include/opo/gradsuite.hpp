#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace opo::check {

struct SuiteResult {
  bool ok = true;
  std::vector<std::string> lines;
};

// Full gradient verification: per-operation finite-difference checks over
// seeded inputs, the exact surrogate probes of the step quantizer, and a
// finite-difference sweep of every trainable tensor of a miniature
// end-to-end model (threshold 1e-4 relative; the binary mask is held
// constant during the sweep and the mask decoder and thresholds excluded).
SuiteResult run_gradient_suite(std::uint64_t seed = 1);

}  // namespace opo::check
