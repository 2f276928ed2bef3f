#include <atomic>
#include <cstdlib>
#include <string>

#include "stegan/simd/kernels.hpp"

namespace stegan::simd {
namespace {

bool cpu_has(Isa isa) {
#if defined(STEGAN_HAVE_X86_KERNELS)
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::Avx512:
      return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("fma");
  }
  return false;
#else
  return isa == Isa::Scalar;
#endif
}

Isa initial_isa() {
  Isa isa = detect_isa();
  if (const char* env = std::getenv("STEGAN_ISA")) {
    const std::string want(env);
    if (want == "scalar") isa = Isa::Scalar;
    else if (want == "avx2" && isa_available(Isa::Avx2)) isa = Isa::Avx2;
    else if (want == "avx512" && isa_available(Isa::Avx512)) isa = Isa::Avx512;
  }
  return isa;
}

std::atomic<Isa>& selected() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Avx512: return "avx512";
  }
  return "unknown";
}

Isa detect_isa() {
  if (cpu_has(Isa::Avx512)) return Isa::Avx512;
  if (cpu_has(Isa::Avx2)) return Isa::Avx2;
  return Isa::Scalar;
}

bool isa_available(Isa isa) { return cpu_has(isa); }

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

bool set_isa(Isa isa) {
  if (!isa_available(isa)) return false;
  selected().store(isa, std::memory_order_relaxed);
  return true;
}

const KernelTable& kernels_for(Isa isa) {
#if defined(STEGAN_HAVE_X86_KERNELS)
  if (isa == Isa::Avx512) return avx512::table;
  if (isa == Isa::Avx2) return avx2::table;
#else
  (void)isa;
#endif
  return scalar::table;
}

const KernelTable& kernels() { return kernels_for(active_isa()); }

}  // namespace stegan::simd
