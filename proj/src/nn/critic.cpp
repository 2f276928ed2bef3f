#include "stegan/nn/critic.hpp"

#include <string>

#include "stegan/error.hpp"
#include "stegan/simd/kernels.hpp"

namespace stegan::nn {

Critic::Critic(int width, int in_channels)
    : layers_{Conv2d(in_channels, width), Conv2d(width, width), Conv2d(width, width), Conv2d(width, width),
              Conv2d(width, 1)} {}

void Critic::init(std::mt19937_64& rng) {
  for (auto& l : layers_) l.init(rng);
}

Tensor Critic::forward(const Tensor& x, Trace* trace) const {
  if (x.height < kReceptiveField || x.width < kReceptiveField) {
    fail(ErrorCode::InvalidArgument, "critic: input " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                                         " is below the 11x11 receptive field");
  }
  Tensor a = x;
  for (int l = 0; l < kLayers; ++l) {
    Tensor h = layers_[l].forward(a);
    if (trace) trace->inputs[l] = std::move(a);
    if (l == kLayers - 1) return h;
    if (trace) trace->pre[l] = h;
    leaky_relu_inplace(h);
    a = std::move(h);
  }
  return a;
}

Tensor Critic::backward(const Trace& trace, const Tensor& grad_score, bool want_input_grad, bool accumulate_params) {
  Tensor g = grad_score;
  for (int l = kLayers - 1; l >= 0; --l) {
    if (l < kLayers - 1) {
      const Tensor& pre = trace.pre[l];
      simd::kernels().leaky_relu_backward(pre.data.data(), g.data.data(), g.data.data(), g.size(), kLeakySlope);
    }
    const bool need_input = l > 0 || want_input_grad;
    Tensor gin;
    layers_[l].backward(trace.inputs[l], g, need_input ? &gin : nullptr, accumulate_params);
    if (l == 0) return gin;
    g = std::move(gin);
  }
  return {};
}

Tensor Critic::input_gradient(const Tensor& x, InputGradTrace* trace) const {
  Trace local;
  Trace& fwd = trace ? trace->forward : local;
  const Tensor score = forward(x, &fwd);
  Tensor g(1, score.height, score.width, 1.0f);
  for (int l = kLayers - 1; l >= 0; --l) {
    if (l < kLayers - 1) {
      const Tensor& pre = fwd.pre[l];
      simd::kernels().leaky_relu_backward(pre.data.data(), g.data.data(), g.data.data(), g.size(), kLeakySlope);
    }
    if (trace) trace->grad_pre[l] = g;
    g = layers_[l].backward_input(g);
  }
  return g;
}

void Critic::accumulate_penalty_grad(const InputGradTrace& trace, const Tensor& v) {
  Tensor r = v;
  for (int l = 0; l < kLayers; ++l) {
    layers_[l].accumulate_weight_grad(r, trace.grad_pre[l]);
    if (l == kLayers - 1) break;
    Tensor next = layers_[l].forward(r, false);
    const Tensor& pre = trace.forward.pre[l];
    // Multiply by the activation slope mask.
    simd::kernels().leaky_relu_backward(pre.data.data(), next.data.data(), next.data.data(), next.size(),
                                        kLeakySlope);
    r = std::move(next);
  }
}

std::vector<NamedParameter> Critic::parameters() {
  std::vector<NamedParameter> out;
  for (int l = 0; l < kLayers; ++l) {
    out.push_back({"critic.conv" + std::to_string(l) + ".weight", &layers_[l].weight});
    out.push_back({"critic.conv" + std::to_string(l) + ".bias", &layers_[l].bias});
  }
  return out;
}

std::size_t Critic::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

void Critic::zero_grad() {
  for (auto& l : layers_) {
    l.weight.zero_grad();
    l.bias.zero_grad();
  }
}

}  // namespace stegan::nn
