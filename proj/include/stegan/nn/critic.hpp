#pragma once

#include <array>
#include <random>

#include "stegan/nn/layers.hpp"
#include "stegan/tensor.hpp"

namespace stegan::nn {

// Fully convolutional patch critic shared by every scale: four width-wide
// 3x3 convs with leaky ReLU, then a single-filter 3x3 conv. The output is a
// score map with the same spatial dims as the input.
class Critic {
 public:
  static constexpr int kLayers = 5;
  static constexpr int kReceptiveField = 11;

  Critic() = default;
  explicit Critic(int width, int in_channels = 3);

  void init(std::mt19937_64& rng);

  struct Trace {
    std::array<Tensor, kLayers> inputs;      // input to each conv
    std::array<Tensor, kLayers - 1> pre;     // pre-activation of layers 0..3
  };

  Tensor score(const Tensor& x) const { return forward(x, nullptr); }
  Tensor forward(const Tensor& x, Trace* trace) const;

  // Backpropagate dL/d(score map).
  Tensor backward(const Trace& trace, const Tensor& grad_score, bool want_input_grad, bool accumulate_params);

  // Gradient of sum(score(x)) w.r.t. x, plus what is needed to differentiate
  // a function of that gradient w.r.t. the weights.
  struct InputGradTrace {
    Trace forward;
    std::array<Tensor, kLayers> grad_pre;  // d sum(score) / d(conv output l)
  };
  Tensor input_gradient(const Tensor& x, InputGradTrace* trace = nullptr) const;

  // Given v = dP/du for a penalty P(u) of u = input_gradient(x), accumulate
  // dP/dW for every conv weight. Because leaky ReLU is piecewise linear, u is
  // linear in each weight with the activation masks fixed, so this is a
  // bias-free forward pass of v through the masked network, pairing each
  // layer's input with the stored backward signal.
  void accumulate_penalty_grad(const InputGradTrace& trace, const Tensor& v);

  std::vector<NamedParameter> parameters();
  std::size_t param_count() const;
  void zero_grad();

  Conv2d& layer(int l) { return layers_.at(l); }
  const Conv2d& layer(int l) const { return layers_.at(l); }
  int in_channels() const { return layers_[0].in_channels; }

 private:
  std::array<Conv2d, kLayers> layers_;
};

}  // namespace stegan::nn
