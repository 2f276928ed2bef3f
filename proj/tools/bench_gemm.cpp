// Throughput of the three GEMM shapes a 64-channel 3x3 conv uses on a 64x64 map.
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "stegan/simd/kernels.hpp"

using namespace stegan::simd;

namespace {

struct Shape {
  const char* label;
  Trans ta, tb;
  int m, n, k;
};

}  // namespace

int main() {
  const int hw = 64 * 64;
  const Shape shapes[] = {{"forward  NN", Trans::No, Trans::No, 64, hw, 576},
                          {"wgrad    NT", Trans::No, Trans::Yes, 64, 576, hw},
                          {"igrad    TN", Trans::Yes, Trans::No, 576, hw, 64}};
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Avx512}) {
    if (!isa_available(isa)) continue;
    const auto& t = kernels_for(isa);
    for (const Shape& s : shapes) {
      const int lda = s.ta == Trans::No ? s.k : s.m, ldb = s.tb == Trans::No ? s.n : s.k;
      std::vector<float> a(static_cast<std::size_t>(s.m) * s.k, 0.5f), b(static_cast<std::size_t>(s.k) * s.n, 0.25f),
          c(static_cast<std::size_t>(s.m) * s.n);
      const int reps = isa == Isa::Scalar ? 3 : 20;
      const auto t0 = std::chrono::steady_clock::now();
      for (int r = 0; r < reps; ++r) gemm(t, s.ta, s.tb, s.m, s.n, s.k, a.data(), lda, b.data(), ldb, c.data(), s.n, false);
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("%-7s %s  %.1f GFLOP/s\n", std::string(isa_name(isa)).c_str(), s.label,
                  2.0 * s.m * s.n * s.k * reps / sec / 1e9);
    }
  }
}
