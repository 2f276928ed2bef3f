#include <cmath>

#include "stegan/simd/kernels.hpp"

namespace stegan::simd::scalar {
namespace {

constexpr int kMr = 4;
constexpr int kNr = 8;

void micro_kernel(std::int64_t kc, const float* a, const float* b, float* c,
                  std::int64_t ldc, bool accumulate) {
  float acc[kMr][kNr] = {};
  for (std::int64_t p = 0; p < kc; ++p) {
    const float* ap = a + p * kMr;
    const float* bp = b + p * kNr;
    for (int i = 0; i < kMr; ++i) {
      for (int j = 0; j < kNr; ++j) acc[i][j] += ap[i] * bp[j];
    }
  }
  for (int i = 0; i < kMr; ++i) {
    float* row = c + i * ldc;
    for (int j = 0; j < kNr; ++j) row[j] = accumulate ? row[j] + acc[i][j] : acc[i][j];
  }
}

void leaky_relu(const float* x, float* y, std::size_t n, float slope) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_backward(const float* x, const float* gy, float* gx, std::size_t n,
                         float slope) {
  for (std::size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0f ? gy[i] : slope * gy[i];
}

void axpy(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(const float* x, const float* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(x[i]) * y[i];
  return s;
}

void adam(float* param, const float* grad, float* m, float* v, std::size_t n,
          float step_size, float beta1, float beta2, float v_correction, float eps) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * grad[i] * grad[i];
    param[i] -= step_size * m[i] / (std::sqrt(v[i] * v_correction) + eps);
  }
}

}  // namespace

const KernelTable table{
    {kMr, kNr, &micro_kernel}, &leaky_relu, &leaky_relu_backward, &axpy, &dot, &adam,
};

}  // namespace stegan::simd::scalar
