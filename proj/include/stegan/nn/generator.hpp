#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "stegan/keynoise.hpp"
#include "stegan/nn/layers.hpp"
#include "stegan/tensor.hpp"

namespace stegan::nn {

// Three conv units applied back to back at one pyramid scale.
struct ConvBlock {
  std::array<ConvUnit, 3> units;

  ConvBlock() = default;
  explicit ConvBlock(int width) : units{ConvUnit(width, width), ConvUnit(width, width), ConvUnit(width, width)} {}

  std::size_t param_count() const;
};

// Progressively grown multi-scale generator. Scale n has dims()[n]
// (0 = finest). Block j runs at scale N - j; the generator for stage n uses
// the front-end conv, blocks 0..N-n and the back-end conv:
//
//   h     = front(amp[N] * z[N])                        (noise broadcast to RGB)
//   y     = block_0(h)
//   up_j  = resize(y, dims[N-j]);  y = block_j(up_j + amp[N-j] * z[N-j]) + up_j
//   image = tanh(back(y))
//
// Noise maps are single-channel and broadcast over all feature channels.
class Generator {
 public:
  Generator() = default;
  Generator(int width, std::vector<Dims> dims);

  int width() const { return width_; }
  int scale_count() const { return static_cast<int>(dims_.size()); }
  int coarsest() const { return scale_count() - 1; }
  const std::vector<Dims>& dims() const { return dims_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  // Finest stage the current blocks can produce; scale_count() if empty.
  int grown_stage() const { return scale_count() - block_count(); }

  std::vector<float>& noise_amp() { return noise_amp_; }
  const std::vector<float>& noise_amp() const { return noise_amp_; }

  // Add the block for stage n. The first call (n == coarsest()) also
  // initialises the front-end and back-end convs; later calls keep every
  // existing weight and append one freshly initialised block. Stage n may only
  // be grown directly after stage n + 1.
  void init_stage(int n, std::mt19937_64& rng);

  struct Trace {
    int to_stage = 0;
    ConvUnit::Trace head;
    std::vector<std::array<ConvUnit::Trace, 3>> blocks;
    Tensor tail_input;
    Tensor output;
  };

  // Image at scale to_stage; noise must cover every scale of the model.
  Tensor forward(const NoisePyramid& noise, int to_stage, Trace* trace = nullptr) const;

  // Finest-scale image at the geometry of the given noise (one map per
  // scale, any sizes). Requires a fully grown model.
  Tensor forward_resized(const NoisePyramid& noise) const;

  // Backpropagate dL/d(output). Blocks with index < first_trainable_block
  // are frozen (input gradients only); head and tail always accumulate.
  void backward(const Trace& trace, const Tensor& grad_out, int first_trainable_block);

  std::vector<NamedParameter> parameters();
  // Parameters of one block (3 convs with their normalisation terms).
  std::vector<Parameter*> block_parameters(int block);
  std::size_t param_count() const;
  void zero_grad();

  ConvUnit& head() { return head_; }
  ConvBlock& block(int j) { return blocks_.at(j); }
  Conv2d& tail() { return tail_; }
  const ConvBlock& block(int j) const { return blocks_.at(j); }

 private:
  void check_noise(const NoisePyramid& noise) const;
  Tensor run(const NoisePyramid& noise, std::span<const Dims> dims, int to_stage, Trace* trace) const;

  int width_ = 64;
  std::vector<Dims> dims_;
  std::vector<float> noise_amp_;
  ConvUnit head_;
  std::vector<ConvBlock> blocks_;
  Conv2d tail_;
};

}  // namespace stegan::nn
