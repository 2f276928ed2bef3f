#include <algorithm>
#include <vector>

#include "stegan/simd/kernels.hpp"

namespace stegan::simd {
namespace {

constexpr std::int64_t kKc = 256;
constexpr std::int64_t kMc = 120;
constexpr std::int64_t kNc = 2048;

struct Operand {
  const float* data;
  std::int64_t ld;
  bool trans;
  float at(std::int64_t row, std::int64_t col) const {
    return trans ? data[col * ld + row] : data[row * ld + col];
  }
};

// Apack layout: panels of mr rows, each panel k-major.
void pack_a(const Operand& a, std::int64_t i0, std::int64_t mc, std::int64_t p0,
            std::int64_t kc, int mr, float* dst) {
  for (std::int64_t ir = 0; ir < mc; ir += mr) {
    const std::int64_t rows = std::min<std::int64_t>(mr, mc - ir);
    for (std::int64_t p = 0; p < kc; ++p) {
      for (std::int64_t r = 0; r < rows; ++r) dst[r] = a.at(i0 + ir + r, p0 + p);
      for (std::int64_t r = rows; r < mr; ++r) dst[r] = 0.0f;
      dst += mr;
    }
  }
}

void pack_b(const Operand& b, std::int64_t p0, std::int64_t kc, std::int64_t j0,
            std::int64_t nc, int nr, float* dst) {
  for (std::int64_t jr = 0; jr < nc; jr += nr) {
    const std::int64_t cols = std::min<std::int64_t>(nr, nc - jr);
    if (!b.trans && cols == nr) {
      const float* src = b.data + p0 * b.ld + j0 + jr;
      for (std::int64_t p = 0; p < kc; ++p) {
        std::copy_n(src + p * b.ld, nr, dst);
        dst += nr;
      }
      continue;
    }
    for (std::int64_t p = 0; p < kc; ++p) {
      for (std::int64_t c = 0; c < cols; ++c) dst[c] = b.at(p0 + p, j0 + jr + c);
      for (std::int64_t c = cols; c < nr; ++c) dst[c] = 0.0f;
      dst += nr;
    }
  }
}

std::int64_t round_up(std::int64_t v, std::int64_t m) { return (v + m - 1) / m * m; }

// Blocked driver over arbitrary A/B packers:
//   pa(i0, mc, p0, kc, mr, dst), pb(p0, kc, j0, nc, nr, dst).
template <class PackA, class PackB>
void gemm_core(const KernelTable& table, std::int64_t m, std::int64_t n, std::int64_t k, PackA&& pa, PackB&& pb,
               float* c, std::int64_t ldc, bool accumulate) {
  if (m <= 0 || n <= 0) return;
  if (k <= 0) {
    if (!accumulate) {
      for (std::int64_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, 0.0f);
    }
    return;
  }
  const GemmKernel& uk = table.gemm;
  const std::int64_t mc_max = round_up(std::min(kMc, m), uk.mr);
  const std::int64_t nc_max = round_up(std::min(kNc, n), uk.nr);
  thread_local std::vector<float> apack;
  thread_local std::vector<float> bpack;
  apack.resize(static_cast<std::size_t>(mc_max * kKc));
  bpack.resize(static_cast<std::size_t>(nc_max * kKc));
  float tile[16 * 64];

  for (std::int64_t jc = 0; jc < n; jc += kNc) {
    const std::int64_t nc = std::min(kNc, n - jc);
    for (std::int64_t pc = 0; pc < k; pc += kKc) {
      const std::int64_t kc = std::min(kKc, k - pc);
      const bool acc = accumulate || pc > 0;
      pb(pc, kc, jc, nc, uk.nr, bpack.data());
      for (std::int64_t ic = 0; ic < m; ic += kMc) {
        const std::int64_t mc = std::min(kMc, m - ic);
        pa(ic, mc, pc, kc, uk.mr, apack.data());
        for (std::int64_t jr = 0; jr < nc; jr += uk.nr) {
          const std::int64_t cols = std::min<std::int64_t>(uk.nr, nc - jr);
          const float* bp = bpack.data() + jr * kc;
          for (std::int64_t ir = 0; ir < mc; ir += uk.mr) {
            const std::int64_t rows = std::min<std::int64_t>(uk.mr, mc - ir);
            const float* ap = apack.data() + ir * kc;
            float* cp = c + (ic + ir) * ldc + jc + jr;
            if (rows == uk.mr && cols == uk.nr) {
              uk.fn(kc, ap, bp, cp, ldc, acc);
              continue;
            }
            uk.fn(kc, ap, bp, tile, uk.nr, false);
            for (std::int64_t r = 0; r < rows; ++r) {
              for (std::int64_t q = 0; q < cols; ++q) {
                const float v = tile[r * uk.nr + q];
                cp[r * ldc + q] = acc ? cp[r * ldc + q] + v : v;
              }
            }
          }
        }
      }
    }
  }
}

// Offset of im2col row p = (ci, ky, kx) inside a padded input.
struct PaddedGeometry {
  std::int64_t plane;  // (h + 2) * (w + 2)
  std::int64_t row;    // w + 2
  std::int64_t offset(std::int64_t p) const {
    const std::int64_t ci = p / 9, t = p % 9;
    return ci * plane + (t / 3) * row + t % 3;
  }
};

}  // namespace

void gemm(const KernelTable& table, Trans trans_a, Trans trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          const float* a, std::int64_t lda, const float* b, std::int64_t ldb, float* c, std::int64_t ldc,
          bool accumulate) {
  const Operand opa{a, lda, trans_a == Trans::Yes};
  const Operand opb{b, ldb, trans_b == Trans::Yes};
  gemm_core(
      table, m, n, k,
      [&](std::int64_t i0, std::int64_t mc, std::int64_t p0, std::int64_t kc, int mr, float* dst) {
        pack_a(opa, i0, mc, p0, kc, mr, dst);
      },
      [&](std::int64_t p0, std::int64_t kc, std::int64_t j0, std::int64_t nc, int nr, float* dst) {
        pack_b(opb, p0, kc, j0, nc, nr, dst);
      },
      c, ldc, accumulate);
}

void conv3x3_wide(const KernelTable& table, const float* weight, int out_channels, int in_channels,
                  const float* padded, int height, int width, float* out, bool accumulate) {
  const PaddedGeometry geo{static_cast<std::int64_t>(height + 2) * (width + 2), width + 2};
  const std::int64_t k = static_cast<std::int64_t>(in_channels) * 9;
  const std::int64_t n = static_cast<std::int64_t>(height) * (width + 2);
  const Operand opa{weight, k, false};
  gemm_core(
      table, out_channels, n, k,
      [&](std::int64_t i0, std::int64_t mc, std::int64_t p0, std::int64_t kc, int mr, float* dst) {
        pack_a(opa, i0, mc, p0, kc, mr, dst);
      },
      [&](std::int64_t p0, std::int64_t kc, std::int64_t j0, std::int64_t nc, int nr, float* dst) {
        for (std::int64_t jr = 0; jr < nc; jr += nr) {
          const std::int64_t cols = std::min<std::int64_t>(nr, nc - jr);
          for (std::int64_t p = 0; p < kc; ++p) {
            const float* src = padded + geo.offset(p0 + p) + j0 + jr;
            std::copy_n(src, cols, dst);
            std::fill(dst + cols, dst + nr, 0.0f);
            dst += nr;
          }
        }
      },
      out, n, accumulate);
}

void conv3x3_weight_grad_wide(const KernelTable& table, const float* grad_wide, int out_channels, int in_channels,
                              const float* padded, int height, int width, float* weight_grad) {
  const PaddedGeometry geo{static_cast<std::int64_t>(height + 2) * (width + 2), width + 2};
  const std::int64_t n = static_cast<std::int64_t>(in_channels) * 9;
  const std::int64_t k = static_cast<std::int64_t>(height) * (width + 2);
  const Operand opa{grad_wide, k, false};
  gemm_core(
      table, out_channels, n, k,
      [&](std::int64_t i0, std::int64_t mc, std::int64_t p0, std::int64_t kc, int mr, float* dst) {
        pack_a(opa, i0, mc, p0, kc, mr, dst);
      },
      [&](std::int64_t p0, std::int64_t kc, std::int64_t j0, std::int64_t nc, int nr, float* dst) {
        for (std::int64_t jr = 0; jr < nc; jr += nr) {
          const std::int64_t cols = std::min<std::int64_t>(nr, nc - jr);
          for (std::int64_t q = 0; q < cols; ++q) {
            const float* src = padded + geo.offset(j0 + jr + q) + p0;
            for (std::int64_t p = 0; p < kc; ++p) dst[p * nr + q] = src[p];
          }
          for (std::int64_t q = cols; q < nr; ++q) {
            for (std::int64_t p = 0; p < kc; ++p) dst[p * nr + q] = 0.0f;
          }
          dst += kc * nr;
        }
      },
      weight_grad, n, true);
}

void gemm(Trans trans_a, Trans trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          const float* a, std::int64_t lda, const float* b, std::int64_t ldb, float* c,
          std::int64_t ldc, bool accumulate) {
  gemm(kernels(), trans_a, trans_b, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

}  // namespace stegan::simd
