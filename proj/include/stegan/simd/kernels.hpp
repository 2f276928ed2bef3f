#pragma once

// Data-parallel inner loops used by the network layers and the optimizer.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// AVX2 and AVX-512 variants. The active variant is chosen once at startup from
// CPUID and may be overridden with the STEGAN_ISA environment variable
// ("scalar", "avx2", "avx512") or programmatically via set_isa().

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace stegan::simd {

enum class Isa { Scalar, Avx2, Avx512 };

std::string_view isa_name(Isa isa);

// Best variant the running CPU supports (ignores the override).
Isa detect_isa();

// True if the variant was compiled in and the CPU can execute it.
bool isa_available(Isa isa);

// Currently selected variant.
Isa active_isa();

// Select a variant; returns false (and leaves the selection unchanged) if it
// is unavailable.
bool set_isa(Isa isa);

// Register-tile micro-kernel: C[mr x nr] (+)= Apack[kc x mr]^T * Bpack[kc x nr].
// Apack is stored k-major with mr values per k; Bpack k-major with nr values.
using MicroKernel = void (*)(std::int64_t kc, const float* a, const float* b,
                             float* c, std::int64_t ldc, bool accumulate);

struct GemmKernel {
  int mr;
  int nr;
  MicroKernel fn;
};

struct KernelTable {
  GemmKernel gemm;

  // y = x > 0 ? x : slope * x
  void (*leaky_relu)(const float* x, float* y, std::size_t n, float slope);
  // gx = gy * (x > 0 ? 1 : slope)
  void (*leaky_relu_backward)(const float* x, const float* gy, float* gx,
                              std::size_t n, float slope);
  // y += a * x
  void (*axpy)(float a, const float* x, float* y, std::size_t n);
  // sum(x * y), accumulated in float lanes then reduced in double
  double (*dot)(const float* x, const float* y, std::size_t n);
  // One Adam step on n parameters. step_size already folds in the
  // first-moment bias correction; v_correction is 1 / (1 - beta2^t).
  void (*adam)(float* param, const float* grad, float* m, float* v,
               std::size_t n, float step_size, float beta1, float beta2,
               float v_correction, float eps);
};

const KernelTable& kernels();
const KernelTable& kernels_for(Isa isa);

namespace scalar {
extern const KernelTable table;
}
#if defined(STEGAN_HAVE_X86_KERNELS)
namespace avx2 {
extern const KernelTable table;
}
namespace avx512 {
extern const KernelTable table;
}
#endif

enum class Trans { No, Yes };

// Row-major single-precision GEMM: C = op(A) * op(B), or C += ... when
// accumulate is set. op(A) is M x K, op(B) is K x N. Uses the active kernel
// table unless one is passed explicitly.
void gemm(Trans trans_a, Trans trans_b, std::int64_t m, std::int64_t n,
          std::int64_t k, const float* a, std::int64_t lda, const float* b,
          std::int64_t ldb, float* c, std::int64_t ldc, bool accumulate);

void gemm(const KernelTable& table, Trans trans_a, Trans trans_b,
          std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
          std::int64_t lda, const float* b, std::int64_t ldb, float* c,
          std::int64_t ldc, bool accumulate);

// 3x3 "same" convolutions without an im2col buffer. `padded` is the input
// with a one-pixel zero border, in_channels x (height + 2) x (width + 2),
// followed by two spare zero floats. Outputs live on a "wide" grid of
// height x (width + 2) per channel whose last two columns are scratch.
//
// out_wide (+)= weight (out, in, 3, 3) applied to padded.
void conv3x3_wide(const KernelTable& table, const float* weight, int out_channels, int in_channels,
                  const float* padded, int height, int width, float* out_wide, bool accumulate);

// weight_grad += correlation of grad_wide (scratch columns must be zero)
// with padded.
void conv3x3_weight_grad_wide(const KernelTable& table, const float* grad_wide, int out_channels, int in_channels,
                              const float* padded, int height, int width, float* weight_grad);

}  // namespace stegan::simd
