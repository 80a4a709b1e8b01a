#pragma once

#include <cstddef>
#include <string>

namespace opo::kernels {

// Flat numeric inner loops behind the tensor ops. Every entry has a scalar
// reference implementation and, on x86-64, an AVX2 variant that is required
// to produce bit-identical results (same evaluation order, no FMA).
struct Ops {
  const char* name;

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out = a * s
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  // out += a * s
  void (*axpy)(double s, const double* a, double* out, std::size_t n);
  void (*relu)(const double* a, double* out, std::size_t n);
  void (*sqrt)(const double* a, double* out, std::size_t n);
  // C (+)= A[m x k] * B[k x n], row-major, i-k-j loop order.
  void (*matmul)(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t k, std::size_t n, bool accumulate);
};

const Ops& scalar_ops();

// True when the AVX2 table exists in this build and the CPU supports it.
bool avx2_available();
const Ops& avx2_ops();  // only valid when avx2_available()

// Active table. Defaults to the best supported variant; the OPO_SIMD
// environment variable ("scalar", "avx2", "auto") overrides at startup.
const Ops& active();

// Forces a variant by name ("scalar", "avx2", "auto"). Throws on an unknown
// name or an unsupported variant.
void select(const std::string& name);

}  // namespace opo::kernels
