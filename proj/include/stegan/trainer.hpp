#pragma once

#include <concepts>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "stegan/image.hpp"
#include "stegan/keynoise.hpp"
#include "stegan/model.hpp"
#include "stegan/nn/critic.hpp"
#include "stegan/nn/generator.hpp"
#include "stegan/pyramid.hpp"

namespace stegan {

// How the critic input gradient is reduced before the unit-norm penalty.
enum class PenaltyNorm {
  Total,     // one norm over the whole image
  PerPixel,  // norm over channels at each pixel, penalties averaged over pixels
};

struct TrainConfig {
  double lambda = 10.0;           // reconstruction weight
  double gp_coeff = 0.1;          // gradient-penalty weight
  double lr = 5e-4;
  double lr_decay = 0.1;
  double decay_at_fraction = 0.8;
  int iters_per_stage = 2000;
  int stages = 6;
  int coarsest_min_dim = 25;
  int trainable_block_window = 3;
  int secrets = 0;                // informational; train() uses the list it is given
  int width = 64;
  int critic_steps = 3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  // Learning-rate multiplier per step back from the newest trainable block.
  double block_lr_scale = 0.1;
  PenaltyNorm penalty_norm = PenaltyNorm::Total;
  std::uint64_t seed = 0;

  void validate() const;
};

// Learning rate in effect at a given iteration of a stage.
double learning_rate_at(const TrainConfig& cfg, int iter);

// Anything exposing the gradient of its summed score w.r.t. its input.
template <class C>
concept InputDifferentiable = requires(const C& c, const Tensor& x) {
  { c.input_gradient(x) } -> std::convertible_to<Tensor>;
};

// (||u|| - 1)^2 under the chosen reduction, and its gradient w.r.t. u.
double penalty_from_gradient(const Tensor& u, PenaltyNorm norm, Tensor* dpenalty_du = nullptr);

Tensor interpolate(const Tensor& real, const Tensor& fake, float eps);

// Penalty at x = eps * real + (1 - eps) * fake with eps drawn from U[0, 1].
template <InputDifferentiable C>
double gradient_penalty(const C& critic, const Tensor& real, const Tensor& fake, std::mt19937_64& rng,
                        PenaltyNorm norm = PenaltyNorm::Total) {
  const float eps = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
  return penalty_from_gradient(critic.input_gradient(interpolate(real, fake, eps)), norm);
}

// Penalty at a fixed interpolation point; if accumulate is set, adds
// scale * dP/dW into the critic gradients.
double gradient_penalty_at(nn::Critic& critic, const Tensor& x, PenaltyNorm norm, bool accumulate, float scale);

struct AdversarialLosses {
  double critic_loss;
  double gen_loss;
  double penalty;
};

// critic_loss = mean D(fake) - mean D(real) + gp_coeff * penalty;
// gen_loss = -mean D(fake).
AdversarialLosses adversarial_losses(const nn::Critic& critic, const Tensor& real, const Tensor& fake,
                                     double gp_coeff, std::mt19937_64& rng, PenaltyNorm norm = PenaltyNorm::Total);

// MSE between the generator output at stage n and the target.
double reconstruction_loss(const nn::Generator& gen, const NoisePyramid& keyed, const ImageF& target, int n);

// Mean of reconstruction_loss over (noise, target) pairs; throws if empty.
double multi_reconstruction_loss(const nn::Generator& gen, std::span<const NoisePyramid> noises,
                                 std::span<const ImageF> targets, int n);

// Adam over groups of parameters with per-group learning-rate multipliers.
class Adam {
 public:
  struct Group {
    std::vector<nn::Parameter*> params;
    double lr_scale = 1.0;
  };

  Adam(std::vector<Group> groups, double beta1, double beta2, double eps = 1e-8);
  void step(double lr);
  int steps() const { return t_; }

 private:
  struct Slot {
    nn::Parameter* param;
    double lr_scale;
    std::vector<float> m, v;
  };
  std::vector<Slot> slots_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

struct StageStats {
  int stage = 0;
  double rec_loss_start = 0.0;
  double rec_loss_end = 0.0;
  double critic_loss_end = 0.0;
  double gen_loss_end = 0.0;
  float noise_amp = 1.0f;
};

struct TrainHooks {
  std::ostream* log = nullptr;  // one JSON object per line
  int log_every = 50;
  int checkpoint_every = 0;     // iterations; 0 disables
  std::function<void(const StegoModel&, int stage, int iter)> checkpoint;
  std::function<void(const StageStats&)> stage_done;
};

// Trains one stage. If the generator is at stage n + 1 it is grown first;
// the noise amplitude for stage n is set from the reconstruction error of the
// upsampled stage n + 1 output (1.0 at the coarsest stage). Adversarial
// fakes use fresh random noise against cover level n; reconstruction uses the
// keyed noise against each target's level n. Blocks older than the trainable
// window stay bit-identical.
StageStats train_stage(StegoModel& model, nn::Critic& critic, const ImagePyramid& cover,
                       std::span<const ImagePyramid> targets, std::span<const NoisePyramid> keyed, int n,
                       const TrainConfig& cfg, std::mt19937_64& rng, const TrainHooks* hooks = nullptr);

struct TrainResult {
  StegoModel model;
  nn::Critic critic;
  std::vector<StageStats> stages;
};

// Full coarse-to-fine training. With no secrets the reconstruction term
// targets the cover with a fixed random noise set (the original model).
// Secrets are resized to the cover dims.
TrainResult train(const ImageU8& cover, std::span<const ImageU8> secrets, std::span<const EmbeddingKey> keys,
                  const TrainConfig& cfg, const TrainHooks* hooks = nullptr);

}  // namespace stegan
