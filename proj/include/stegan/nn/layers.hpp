#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stegan/tensor.hpp"

namespace stegan::nn {

inline constexpr float kLeakySlope = 0.05f;
inline constexpr float kNormEps = 1e-5f;
inline constexpr float kInitStd = 0.02f;

// A learnable array plus its gradient accumulator.
struct Parameter {
  std::vector<float> value;
  std::vector<float> grad;

  Parameter() = default;
  explicit Parameter(std::size_t n, float fill = 0.0f) : value(n, fill), grad(n, 0.0f) {}

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

// Zero-mean normal initialisation used for every fresh conv weight.
void init_normal(std::vector<float>& values, float stddev, std::mt19937_64& rng);

// 3x3 convolution, stride 1, zero "same" padding. Weight layout is
// (out, in, 3, 3) row-major.
struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  Parameter weight;
  Parameter bias;

  Conv2d() = default;
  Conv2d(int in, int out);

  std::size_t param_count() const { return weight.size() + bias.size(); }
  void init(std::mt19937_64& rng);

  Tensor forward(const Tensor& in, bool with_bias = true) const;

  // grad_in is written if non-null. Weight/bias gradients are accumulated when
  // accumulate_params is set.
  void backward(const Tensor& in, const Tensor& grad_out, Tensor* grad_in, bool accumulate_params);

  // Gradient w.r.t. the input (transposed convolution; output dims == input dims).
  Tensor backward_input(const Tensor& grad_out) const;

  // Accumulate only the weight gradient for a given (input, grad_out) pair.
  void accumulate_weight_grad(const Tensor& in, const Tensor& grad_out);
};

// Batch normalisation over the spatial extent of a single sample (batch size
// one), with a per-channel affine transform. Statistics are always taken from
// the current input, so the layer is a deterministic function of its input.
struct BatchNorm {
  int channels = 0;
  Parameter gamma;
  Parameter beta;

  BatchNorm() = default;
  explicit BatchNorm(int c) : channels(c), gamma(c, 1.0f), beta(c, 0.0f) {}

  std::size_t param_count() const { return gamma.size() + beta.size(); }
};

// conv -> batch-norm -> leaky ReLU.
struct ConvUnit {
  Conv2d conv;
  BatchNorm norm;

  ConvUnit() = default;
  ConvUnit(int in, int out) : conv(in, out), norm(out) {}

  std::size_t param_count() const { return conv.param_count() + norm.param_count(); }

  struct Trace {
    Tensor input;
    Tensor normalized;            // (x - mean) / std, before the affine transform
    std::vector<float> inv_std;   // per channel
  };

  Tensor forward(const Tensor& in, Trace* trace) const;
  // Returns the gradient w.r.t. the unit input when want_input_grad is set,
  // otherwise an empty tensor.
  Tensor backward(const Trace& trace, const Tensor& grad_out, bool want_input_grad, bool accumulate_params);
};

void leaky_relu_inplace(Tensor& t, float slope = kLeakySlope);

// Every learnable array in a fixed, documented order.
struct NamedParameter {
  std::string name;
  Parameter* param;
};

}  // namespace stegan::nn
