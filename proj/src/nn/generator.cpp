#include "stegan/nn/generator.hpp"

#include <cmath>
#include <string>

#include "stegan/error.hpp"
#include "stegan/image.hpp"

namespace stegan::nn {
namespace {

void add_broadcast_noise(Tensor& t, const Tensor& noise, float amp) {
  const std::size_t hw = t.plane();
  for (int c = 0; c < t.channels; ++c) {
    float* p = t.channel(c);
    for (std::size_t i = 0; i < hw; ++i) p[i] += amp * noise.data[i];
  }
}

void init_unit(ConvUnit& unit, std::mt19937_64& rng) {
  unit.conv.init(rng);
  std::fill(unit.norm.gamma.value.begin(), unit.norm.gamma.value.end(), 1.0f);
  std::fill(unit.norm.beta.value.begin(), unit.norm.beta.value.end(), 0.0f);
}

void push_unit(std::vector<NamedParameter>& out, const std::string& prefix, ConvUnit& u) {
  out.push_back({prefix + ".conv.weight", &u.conv.weight});
  out.push_back({prefix + ".conv.bias", &u.conv.bias});
  out.push_back({prefix + ".norm.gamma", &u.norm.gamma});
  out.push_back({prefix + ".norm.beta", &u.norm.beta});
}

}  // namespace

std::size_t ConvBlock::param_count() const {
  std::size_t n = 0;
  for (const auto& u : units) n += u.param_count();
  return n;
}

Generator::Generator(int width, std::vector<Dims> dims)
    : width_(width), dims_(std::move(dims)), noise_amp_(dims_.size(), 1.0f), head_(3, width),
      tail_(width, 3) {
  if (dims_.empty()) fail(ErrorCode::InvalidArgument, "generator: need at least one scale");
  if (width < 1) fail(ErrorCode::InvalidArgument, "generator: width must be >= 1");
}

void Generator::init_stage(int n, std::mt19937_64& rng) {
  if (n < 0 || n > coarsest()) fail(ErrorCode::InvalidArgument, "init_stage: stage out of range");
  if (n != grown_stage() - 1) {
    fail(ErrorCode::InvalidArgument, "init_stage: stage " + std::to_string(n) + " requires stage " +
                                         std::to_string(n + 1) + " to be grown first (model is at stage " +
                                         std::to_string(grown_stage()) + ")");
  }
  if (blocks_.empty()) {
    init_unit(head_, rng);
    tail_.init(rng);
  }
  ConvBlock block(width_);
  for (auto& u : block.units) init_unit(u, rng);
  blocks_.push_back(std::move(block));
}

void Generator::check_noise(const NoisePyramid& noise) const {
  if (noise.levels() != scale_count()) {
    fail(ErrorCode::DimensionMismatch, "generator: noise has " + std::to_string(noise.levels()) +
                                           " levels, model has " + std::to_string(scale_count()));
  }
  for (int n = 0; n < scale_count(); ++n) {
    const Tensor& m = noise.maps[n];
    if (m.channels != 1 || m.dims() != dims_[n]) {
      fail(ErrorCode::DimensionMismatch, "generator: noise level " + std::to_string(n) + " has wrong shape");
    }
  }
}

Tensor Generator::forward(const NoisePyramid& noise, int to_stage, Trace* trace) const {
  check_noise(noise);
  if (to_stage < grown_stage() || to_stage > coarsest()) {
    fail(ErrorCode::InvalidArgument, "generator: stage " + std::to_string(to_stage) + " not available (grown to " +
                                         std::to_string(grown_stage()) + ")");
  }
  return run(noise, dims_, to_stage, trace);
}

Tensor Generator::forward_resized(const NoisePyramid& noise) const {
  if (grown_stage() != 0) fail(ErrorCode::InvalidArgument, "generator: resized sampling needs a fully grown model");
  if (noise.levels() != scale_count()) {
    fail(ErrorCode::DimensionMismatch, "generator: noise has " + std::to_string(noise.levels()) +
                                           " levels, model has " + std::to_string(scale_count()));
  }
  for (const Tensor& m : noise.maps) {
    if (m.channels != 1 || m.height < 1 || m.width < 1) fail(ErrorCode::DimensionMismatch, "generator: bad noise map");
  }
  const std::vector<Dims> dims = noise.dims();
  return run(noise, dims, 0, nullptr);
}

Tensor Generator::run(const NoisePyramid& noise, std::span<const Dims> dims, int to_stage, Trace* trace) const {
  const int top = coarsest();
  const int nblocks = top - to_stage + 1;
  if (trace) {
    trace->to_stage = to_stage;
    trace->blocks.resize(nblocks);
  }

  Tensor x(3, dims[top].height, dims[top].width);
  add_broadcast_noise(x, noise.maps[top], noise_amp_[top]);
  Tensor y = head_.forward(x, trace ? &trace->head : nullptr);
  for (int j = 0; j < nblocks; ++j) {
    const int scale = top - j;
    Tensor up;
    if (j > 0) {
      up = resample(y, dims[scale].height, dims[scale].width);
      y = up;
      add_broadcast_noise(y, noise.maps[scale], noise_amp_[scale]);
    }
    for (int u = 0; u < 3; ++u) y = blocks_[j].units[u].forward(y, trace ? &trace->blocks[j][u] : nullptr);
    if (j > 0) {
      for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += up.data[i];
    }
  }
  Tensor out = tail_.forward(y);
  for (float& v : out.data) v = std::tanh(v);
  if (trace) {
    trace->tail_input = std::move(y);
    trace->output = out;
  }
  return out;
}

void Generator::backward(const Trace& trace, const Tensor& grad_out, int first_trainable_block) {
  if (!grad_out.same_shape(trace.output)) fail(ErrorCode::DimensionMismatch, "generator backward: shape mismatch");
  Tensor g(grad_out.channels, grad_out.height, grad_out.width);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float o = trace.output.data[i];
    g.data[i] = grad_out.data[i] * (1.0f - o * o);
  }
  Tensor gy;
  tail_.backward(trace.tail_input, g, &gy, true);
  const int top = coarsest();
  const int nblocks = static_cast<int>(trace.blocks.size());
  for (int j = nblocks - 1; j >= 0; --j) {
    const bool train = j >= first_trainable_block;
    Tensor gb = gy;
    for (int u = 2; u >= 0; --u) gb = blocks_[j].units[u].backward(trace.blocks[j][u], gb, true, train);
    if (j > 0) {
      for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += gy.data[i];
      const Dims prev = dims_[top - j + 1];
      gy = resample_backward(gb, prev.height, prev.width);
    } else {
      gy = std::move(gb);
    }
  }
  head_.backward(trace.head, gy, false, true);
}

std::vector<NamedParameter> Generator::parameters() {
  std::vector<NamedParameter> out;
  push_unit(out, "head", head_);
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    for (int u = 0; u < 3; ++u) {
      push_unit(out, "block" + std::to_string(j) + ".unit" + std::to_string(u), blocks_[j].units[u]);
    }
  }
  out.push_back({"tail.conv.weight", &tail_.weight});
  out.push_back({"tail.conv.bias", &tail_.bias});
  return out;
}

std::vector<Parameter*> Generator::block_parameters(int block) {
  std::vector<Parameter*> out;
  for (auto& u : blocks_.at(block).units) {
    out.push_back(&u.conv.weight);
    out.push_back(&u.conv.bias);
    out.push_back(&u.norm.gamma);
    out.push_back(&u.norm.beta);
  }
  return out;
}

std::size_t Generator::param_count() const {
  if (blocks_.empty()) return 0;
  std::size_t n = head_.param_count() + tail_.param_count();
  for (const auto& b : blocks_) n += b.param_count();
  return n;
}

void Generator::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

}  // namespace stegan::nn
