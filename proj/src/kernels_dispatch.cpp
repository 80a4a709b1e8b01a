#include "opo/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace opo::kernels {
namespace {

const Ops* g_active = nullptr;

const Ops& pick_auto() {
  if (avx2_available()) return avx2_ops();
  return scalar_ops();
}

const Ops& from_env() {
  if (const char* env = std::getenv("OPO_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return scalar_ops();
    if (v == "avx2" && avx2_available()) return avx2_ops();
    // unknown or unsupported value: fall through to auto
  }
  return pick_auto();
}

}  // namespace

bool avx2_available() {
#if defined(__AVX2__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

#if !defined(__AVX2__)
const Ops& avx2_ops() { throw std::runtime_error("avx2 kernels not built"); }
#endif

const Ops& active() {
  if (!g_active) g_active = &from_env();
  return *g_active;
}

void select(const std::string& name) {
  if (name == "auto") {
    g_active = &pick_auto();
  } else if (name == "scalar") {
    g_active = &scalar_ops();
  } else if (name == "avx2") {
    if (!avx2_available()) throw std::runtime_error("avx2 not supported on this host");
    g_active = &avx2_ops();
  } else {
    throw std::runtime_error("unknown kernel variant: " + name);
  }
}

}  // namespace opo::kernels
