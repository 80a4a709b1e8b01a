#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace opo::rng {

// splitmix64 finalizer; used to derive per-purpose stream seeds.
std::uint64_t mix(std::uint64_t x);

// Seed for a named substream: hashes (root, tag, a, b) so that independent
// consumers (ray sampler, noise, shuffles, ...) never share state.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

// Deterministic random stream. All randomness in the project flows through
// this type; distributions are implemented here (not via std::*_distribution)
// so sequences are reproducible across standard libraries.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : gen_(seed) {}

  static Stream derived(std::uint64_t root, std::string_view tag,
                        std::uint64_t a = 0, std::uint64_t b = 0) {
    return Stream(derive_seed(root, tag, a, b));
  }

  std::uint64_t bits() { return gen_(); }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n);

  // standard normal via Box-Muller (stateless: two uniforms per draw)
  double normal();

  std::vector<double> normals(std::size_t n, double mean = 0.0,
                              double stddev = 1.0);

  // Fisher-Yates permutation of 0..n-1
  std::vector<int> permutation(int n);

  // serializable engine state (decimal words, space separated)
  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 gen_;
};

}  // namespace opo::rng
