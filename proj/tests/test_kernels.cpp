#include <cstring>
#include <vector>

#include "doctest.h"
#include "opo/kernels.hpp"
#include "opo/rng.hpp"

using namespace opo;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  rng::Stream s(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = s.uniform(-2.0, 2.0);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("kernel variants are bit-identical to the scalar reference") {
  if (!kernels::avx2_available()) {
    MESSAGE("avx2 not available; nothing to compare");
    return;
  }
  const auto& ks = kernels::scalar_ops();
  const auto& kv = kernels::avx2_ops();

  // sizes straddling the 4-lane width, including tails
  for (const std::size_t n : {1u, 3u, 4u, 7u, 16u, 33u, 1001u}) {
    const auto a = random_vec(n, 11 + n);
    const auto b = random_vec(n, 77 + n);
    std::vector<double> r1(n), r2(n);

    ks.add(a.data(), b.data(), r1.data(), n);
    kv.add(a.data(), b.data(), r2.data(), n);
    CHECK(bit_equal(r1, r2));

    ks.sub(a.data(), b.data(), r1.data(), n);
    kv.sub(a.data(), b.data(), r2.data(), n);
    CHECK(bit_equal(r1, r2));

    ks.mul(a.data(), b.data(), r1.data(), n);
    kv.mul(a.data(), b.data(), r2.data(), n);
    CHECK(bit_equal(r1, r2));

    ks.scale(a.data(), 1.7, r1.data(), n);
    kv.scale(a.data(), 1.7, r2.data(), n);
    CHECK(bit_equal(r1, r2));

    r1 = b;
    r2 = b;
    ks.axpy(-0.3, a.data(), r1.data(), n);
    kv.axpy(-0.3, a.data(), r2.data(), n);
    CHECK(bit_equal(r1, r2));

    ks.relu(a.data(), r1.data(), n);
    kv.relu(a.data(), r2.data(), n);
    CHECK(bit_equal(r1, r2));

    std::vector<double> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = a[i] * a[i];
    ks.sqrt(pos.data(), r1.data(), n);
    kv.sqrt(pos.data(), r2.data(), n);
    CHECK(bit_equal(r1, r2));
  }
}

TEST_CASE("matmul variants agree bit-for-bit, including accumulation") {
  if (!kernels::avx2_available()) return;
  const auto& ks = kernels::scalar_ops();
  const auto& kv = kernels::avx2_ops();

  struct Dims {
    std::size_t m, k, n;
  };
  for (const Dims d : {Dims{1, 1, 1}, Dims{2, 3, 5}, Dims{7, 4, 9},
                       Dims{16, 16, 16}, Dims{5, 27, 13}, Dims{3, 8, 4}}) {
    const auto a = random_vec(d.m * d.k, d.m * 131 + d.k);
    const auto b = random_vec(d.k * d.n, d.n * 31 + d.k);
    std::vector<double> c1(d.m * d.n), c2(d.m * d.n);
    ks.matmul(a.data(), b.data(), c1.data(), d.m, d.k, d.n, false);
    kv.matmul(a.data(), b.data(), c2.data(), d.m, d.k, d.n, false);
    CHECK(bit_equal(c1, c2));

    const auto seed = random_vec(d.m * d.n, 5 + d.m);
    c1 = seed;
    c2 = seed;
    ks.matmul(a.data(), b.data(), c1.data(), d.m, d.k, d.n, true);
    kv.matmul(a.data(), b.data(), c2.data(), d.m, d.k, d.n, true);
    CHECK(bit_equal(c1, c2));
  }
}

TEST_CASE("kernel selection") {
  CHECK_NOTHROW(kernels::select("scalar"));
  CHECK(std::string(kernels::active().name) == "scalar");
  if (kernels::avx2_available()) {
    CHECK_NOTHROW(kernels::select("avx2"));
    CHECK(std::string(kernels::active().name) == "avx2");
  }
  CHECK_THROWS(kernels::select("sse9"));
  kernels::select("auto");
}
