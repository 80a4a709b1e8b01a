#include "opo/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace opo::rng {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the tag
  for (const char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return mix(mix(mix(root ^ h) + a) + b);
}

std::uint64_t Stream::below(std::uint64_t n) {
  // rejection sampling keeps the draw unbiased
  const std::uint64_t limit = ~0ull - (~0ull % n);
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

double Stream::normal() {
  // Box-Muller; u1 bounded away from zero so log stays finite.
  double u1 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> Stream::normals(std::size_t n, double mean,
                                    double stddev) {
  std::vector<double> out(n);
  for (auto& v : out) v = mean + stddev * normal();
  return out;
}

std::vector<int> Stream::permutation(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

std::string Stream::state() const {
  std::ostringstream os;
  os << gen_;
  return os.str();
}

void Stream::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> gen_;
}

}  // namespace opo::rng
