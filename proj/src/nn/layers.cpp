#include "stegan/nn/layers.hpp"

#include <cmath>
#include <numeric>

#include "stegan/error.hpp"
#include "stegan/simd/kernels.hpp"

namespace stegan::nn {
namespace {

// in -> channels x (h + 2) x (w + 2) with a zero border, plus two spare zeros.
void pad(const Tensor& in, std::vector<float>& out) {
  const int h = in.height, w = in.width;
  const std::size_t plane = static_cast<std::size_t>(h + 2) * (w + 2);
  out.assign(plane * in.channels + 2, 0.0f);
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.channel(c);
    float* dst = out.data() + plane * c + (w + 2) + 1;
    for (int y = 0; y < h; ++y) std::copy_n(src + static_cast<std::size_t>(y) * w, w, dst + static_cast<std::size_t>(y) * (w + 2));
  }
}

// Tensor -> wide grid (h x (w + 2)) with zeroed scratch columns.
void widen(const Tensor& in, std::vector<float>& out) {
  const int h = in.height, w = in.width;
  out.assign(static_cast<std::size_t>(h) * (w + 2) * in.channels, 0.0f);
  for (int c = 0; c < in.channels; ++c) {
    const float* src = in.channel(c);
    float* dst = out.data() + static_cast<std::size_t>(h) * (w + 2) * c;
    for (int y = 0; y < h; ++y) std::copy_n(src + static_cast<std::size_t>(y) * w, w, dst + static_cast<std::size_t>(y) * (w + 2));
  }
}

void narrow(const std::vector<float>& wide, Tensor& out) {
  const int h = out.height, w = out.width;
  for (int c = 0; c < out.channels; ++c) {
    const float* src = wide.data() + static_cast<std::size_t>(h) * (w + 2) * c;
    float* dst = out.channel(c);
    for (int y = 0; y < h; ++y) std::copy_n(src + static_cast<std::size_t>(y) * (w + 2), w, dst + static_cast<std::size_t>(y) * w);
  }
}

thread_local std::vector<float> t_padded;
thread_local std::vector<float> t_wide;

}  // namespace

void init_normal(std::vector<float>& values, float stddev, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0f, stddev);
  for (float& v : values) v = dist(rng);
}

Conv2d::Conv2d(int in, int out)
    : in_channels(in), out_channels(out),
      weight(static_cast<std::size_t>(in) * out * 9), bias(static_cast<std::size_t>(out)) {}

void Conv2d::init(std::mt19937_64& rng) {
  init_normal(weight.value, kInitStd, rng);
  std::fill(bias.value.begin(), bias.value.end(), 0.0f);
}

Tensor Conv2d::forward(const Tensor& in, bool with_bias) const {
  if (in.channels != in_channels) {
    fail(ErrorCode::DimensionMismatch, "conv: expected " + std::to_string(in_channels) + " input channels, got " +
                                           std::to_string(in.channels));
  }
  Tensor out(out_channels, in.height, in.width);
  pad(in, t_padded);
  t_wide.resize(static_cast<std::size_t>(in.height) * (in.width + 2) * out_channels);
  simd::conv3x3_wide(simd::kernels(), weight.value.data(), out_channels, in_channels, t_padded.data(), in.height,
                     in.width, t_wide.data(), false);
  narrow(t_wide, out);
  if (with_bias) {
    const std::size_t hw = out.plane();
    for (int c = 0; c < out_channels; ++c) {
      float* o = out.channel(c);
      const float b = bias.value[c];
      for (std::size_t i = 0; i < hw; ++i) o[i] += b;
    }
  }
  return out;
}

void Conv2d::backward(const Tensor& in, const Tensor& grad_out, Tensor* grad_in, bool accumulate_params) {
  if (accumulate_params) {
    accumulate_weight_grad(in, grad_out);
    const std::size_t hw = grad_out.plane();
    for (int c = 0; c < out_channels; ++c) {
      const float* g = grad_out.channel(c);
      double s = 0.0;
      for (std::size_t i = 0; i < hw; ++i) s += g[i];
      bias.grad[c] += static_cast<float>(s);
    }
  }
  if (grad_in) *grad_in = backward_input(grad_out);
}

// The input gradient of a same-padded 3x3 conv is another same-padded conv
// with the kernel flipped and the channel roles swapped.
Tensor Conv2d::backward_input(const Tensor& grad_out) const {
  thread_local std::vector<float> flipped;
  flipped.resize(weight.value.size());
  for (int co = 0; co < out_channels; ++co)
    for (int ci = 0; ci < in_channels; ++ci)
      for (int t = 0; t < 9; ++t)
        flipped[(static_cast<std::size_t>(ci) * out_channels + co) * 9 + (8 - t)] =
            weight.value[(static_cast<std::size_t>(co) * in_channels + ci) * 9 + t];
  Tensor grad_in(in_channels, grad_out.height, grad_out.width);
  pad(grad_out, t_padded);
  t_wide.resize(static_cast<std::size_t>(grad_out.height) * (grad_out.width + 2) * in_channels);
  simd::conv3x3_wide(simd::kernels(), flipped.data(), in_channels, out_channels, t_padded.data(), grad_out.height,
                     grad_out.width, t_wide.data(), false);
  narrow(t_wide, grad_in);
  return grad_in;
}

void Conv2d::accumulate_weight_grad(const Tensor& in, const Tensor& grad_out) {
  pad(in, t_padded);
  widen(grad_out, t_wide);
  simd::conv3x3_weight_grad_wide(simd::kernels(), t_wide.data(), out_channels, in_channels, t_padded.data(),
                                 in.height, in.width, weight.grad.data());
}

void leaky_relu_inplace(Tensor& t, float slope) {
  simd::kernels().leaky_relu(t.data.data(), t.data.data(), t.data.size(), slope);
}

Tensor ConvUnit::forward(const Tensor& in, Trace* trace) const {
  Tensor x = conv.forward(in);
  const std::size_t hw = x.plane();
  std::vector<float> inv_std(x.channels);
  for (int c = 0; c < x.channels; ++c) {
    float* p = x.channel(c);
    double mean = 0.0;
    for (std::size_t i = 0; i < hw; ++i) mean += p[i];
    mean /= static_cast<double>(hw);
    double var = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      const double d = p[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(hw);
    const float istd = static_cast<float>(1.0 / std::sqrt(var + kNormEps));
    const float m = static_cast<float>(mean);
    for (std::size_t i = 0; i < hw; ++i) p[i] = (p[i] - m) * istd;
    inv_std[c] = istd;
  }
  if (trace) {
    trace->input = in;
    trace->normalized = x;
    trace->inv_std = std::move(inv_std);
  }
  for (int c = 0; c < x.channels; ++c) {
    float* p = x.channel(c);
    const float g = norm.gamma.value[c], b = norm.beta.value[c];
    for (std::size_t i = 0; i < hw; ++i) p[i] = g * p[i] + b;
  }
  leaky_relu_inplace(x);
  return x;
}

Tensor ConvUnit::backward(const Trace& trace, const Tensor& grad_out, bool want_input_grad, bool accumulate_params) {
  const Tensor& xh = trace.normalized;
  const std::size_t hw = xh.plane();
  Tensor grad_conv(xh.channels, xh.height, xh.width);
  std::vector<float> gy(hw);
  for (int c = 0; c < xh.channels; ++c) {
    const float* n = xh.channel(c);
    const float* go = grad_out.channel(c);
    const float g = norm.gamma.value[c], b = norm.beta.value[c];
    double sum_gy = 0.0, sum_gy_xh = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      const float y = g * n[i] + b;
      gy[i] = y > 0.0f ? go[i] : kLeakySlope * go[i];
      sum_gy += gy[i];
      sum_gy_xh += static_cast<double>(gy[i]) * n[i];
    }
    if (accumulate_params) {
      norm.gamma.grad[c] += static_cast<float>(sum_gy_xh);
      norm.beta.grad[c] += static_cast<float>(sum_gy);
    }
    // d/dx of gamma * (x - mean) * inv_std
    const float scale = g * trace.inv_std[c];
    const float mean_g = static_cast<float>(sum_gy / static_cast<double>(hw));
    const float mean_gx = static_cast<float>(sum_gy_xh / static_cast<double>(hw));
    float* dst = grad_conv.channel(c);
    for (std::size_t i = 0; i < hw; ++i) dst[i] = scale * (gy[i] - mean_g - n[i] * mean_gx);
  }
  Tensor grad_in;
  conv.backward(trace.input, grad_conv, want_input_grad ? &grad_in : nullptr, accumulate_params);
  return grad_in;
}

}  // namespace stegan::nn
