#include <doctest.h>

#include "oracle.hpp"

#include <cmath>
#include <random>

#include "stegan/error.hpp"
#include "stegan/keynoise.hpp"
#include "stegan/nn/critic.hpp"
#include "stegan/nn/generator.hpp"
#include "stegan/pyramid.hpp"

using namespace stegan;
using namespace stegan::nn;

namespace {

Tensor random_tensor(int c, int h, int w, std::mt19937_64& rng, float scale = 1.0f) {
  std::normal_distribution<float> d(0.0f, scale);
  Tensor t(c, h, w);
  for (auto& v : t.data) v = d(rng);
  return t;
}

// Direct 3x3 same-padded convolution.
Tensor naive_conv(const Conv2d& conv, const Tensor& in, bool bias) {
  Tensor out(conv.out_channels, in.height, in.width);
  for (int co = 0; co < conv.out_channels; ++co)
    for (int y = 0; y < in.height; ++y)
      for (int x = 0; x < in.width; ++x) {
        double s = bias ? conv.bias.value[co] : 0.0;
        for (int ci = 0; ci < conv.in_channels; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int sy = y + ky - 1, sx = x + kx - 1;
              if (sy < 0 || sy >= in.height || sx < 0 || sx >= in.width) continue;
              s += static_cast<double>(conv.weight.value[((co * conv.in_channels + ci) * 3 + ky) * 3 + kx]) *
                   in.at(ci, sy, sx);
            }
        out.at(co, y, x) = static_cast<float>(s);
      }
  return out;
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

std::vector<Dims> dims4() { return pyramid_dims(40, 48, 4, 16); }

Generator grown(int width, const std::vector<Dims>& dims, std::uint64_t seed) {
  Generator g(width, dims);
  std::mt19937_64 rng(seed);
  for (int n = g.coarsest(); n >= 0; --n) g.init_stage(n, rng);
  return g;
}

std::vector<float> all_weights(Generator& g) {
  std::vector<float> out;
  for (auto& p : g.parameters()) out.insert(out.end(), p.param->value.begin(), p.param->value.end());
  return out;
}

}  // namespace

TEST_CASE("conv forward, input gradient and weight gradient match direct evaluation") {
  std::mt19937_64 rng(21);
  const int shapes[][4] = {{3, 64, 9, 13}, {64, 1, 11, 11}, {5, 7, 1, 1}, {8, 3, 2, 17}, {16, 16, 23, 5}};
  for (auto [ci, co, h, w] : shapes) {
    CAPTURE(ci);
    CAPTURE(co);
    Conv2d conv(ci, co);
    conv.init(rng);
    for (auto& b : conv.bias.value) b = std::normal_distribution<float>(0, 1)(rng);
    const Tensor in = random_tensor(ci, h, w, rng);
    CHECK(max_abs_diff(conv.forward(in).data, naive_conv(conv, in, true).data) < 1e-5);
    CHECK(max_abs_diff(conv.forward(in, false).data, naive_conv(conv, in, false).data) < 1e-5);

    // <conv(x), g> = <x, conv^T(g)>
    const Tensor g = random_tensor(co, h, w, rng);
    const Tensor y = conv.forward(in, false);
    const Tensor gx = conv.backward_input(g);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += static_cast<double>(y.data[i]) * g.data[i];
    for (std::size_t i = 0; i < in.size(); ++i) rhs += static_cast<double>(in.data[i]) * gx.data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));

    // dW[co, ci, ky, kx] = sum_xy g[co, y, x] * in[ci, y + ky - 1, x + kx - 1]
    conv.weight.zero_grad();
    conv.bias.zero_grad();
    conv.backward(in, g, nullptr, true);
    double worst = 0;
    for (int o = 0; o < co; ++o)
      for (int i = 0; i < ci; ++i)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            double s = 0;
            for (int yy = 0; yy < h; ++yy)
              for (int xx = 0; xx < w; ++xx) {
                const int sy = yy + ky - 1, sx = xx + kx - 1;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                s += static_cast<double>(g.at(o, yy, xx)) * in.at(i, sy, sx);
              }
            worst = std::max(worst, std::abs(s - conv.weight.grad[((o * ci + i) * 3 + ky) * 3 + kx]));
          }
    CHECK(worst < 1e-3);
    for (int o = 0; o < co; ++o) {
      double s = 0;
      for (int p = 0; p < h * w; ++p) s += g.channel(o)[p];
      CHECK(conv.bias.grad[o] == doctest::Approx(s).epsilon(1e-4));
    }
  }
}

TEST_CASE("conv rejects a channel mismatch") {
  Conv2d conv(3, 4);
  CHECK_THROWS_AS(conv.forward(Tensor(2, 5, 5)), Error);
}

TEST_CASE("parameter counts") {
  CHECK(Conv2d(3, 64).param_count() == 1792);
  CHECK(Conv2d(64, 3).param_count() == 1731);
  Generator empty(64, pyramid_dims(164, 244, 6, 25));
  CHECK(empty.param_count() == 0);

  Generator g = grown(64, pyramid_dims(164, 244, 6, 25), 1);
  // 6 blocks x 3 x (3*3*64*64 + 64) + 1,792 + 1,731 + 19 x 128 norm terms
  CHECK(g.param_count() == 664704 + 1792 + 1731 + 19 * 128);
  CHECK(g.param_count() == 670659);
  CHECK(std::abs(static_cast<double>(g.param_count()) - 670000.0) / 670000.0 < 0.01);
  std::size_t counted = 0;
  for (auto& p : g.parameters()) counted += p.param->size();
  CHECK(counted == g.param_count());
}

TEST_CASE("progressive growth") {
  const auto dims = dims4();
  Generator g(16, dims);
  std::mt19937_64 rng(2);
  SUBCASE("stages must be grown coarse to fine") {
    CHECK_THROWS_AS(g.init_stage(2, rng), Error);
    CHECK_THROWS_AS(g.init_stage(4, rng), Error);
  }
  SUBCASE("first stage: one block, fresh weights") {
    g.init_stage(3, rng);
    CHECK(g.block_count() == 1);
    CHECK(g.grown_stage() == 3);
    double sq = 0;
    const auto& w = g.block(0).units[0].conv.weight.value;
    for (float v : w) sq += v * v;
    CHECK(std::sqrt(sq / w.size()) == doctest::Approx(0.02).epsilon(0.1));
    for (float b : g.block(0).units[0].conv.bias.value) CHECK(b == 0.0f);
  }
  SUBCASE("growth keeps existing weights and adds one block") {
    g.init_stage(3, rng);
    const auto before = all_weights(g);
    const std::size_t count_before = g.param_count();
    g.init_stage(2, rng);
    CHECK(g.block_count() == 2);
    CHECK(g.param_count() - count_before == g.block(1).param_count());
    const auto after = all_weights(g);
    // parameters() lists head, blocks in order, tail: compare the common prefix and the tail
    const std::size_t tail = g.tail().param_count();
    CHECK(std::equal(before.begin(), before.end() - tail, after.begin()));
    CHECK(std::equal(before.end() - tail, before.end(), after.end() - tail));
    CHECK_THROWS_AS(g.init_stage(2, rng), Error);
  }
}

TEST_CASE("generator forward shapes and range") {
  const auto dims = dims4();
  Generator g = grown(16, dims, 3);
  const auto noise = noise_pyramid(11, dims);
  CHECK(g.forward(noise, 3).dims() == dims[3]);
  CHECK(g.forward(noise, 0).dims() == dims[0]);
  CHECK(g.forward(noise, 0).channels == 3);

  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    auto z = noise_pyramid(1000 + i, dims, NoiseStream::Sampling);
    for (auto& m : z.maps)
      for (auto& v : m.data) v *= 5.0f;  // push activations hard
    const Tensor out = g.forward(z, static_cast<int>(rng() % 4));
    for (float v : out.data) {
      REQUIRE(v >= -1.0f);
      REQUIRE(v <= 1.0f);
    }
  }
}

TEST_CASE("generator forward validates its inputs") {
  const auto dims = dims4();
  Generator g(8, dims);
  std::mt19937_64 rng(5);
  g.init_stage(3, rng);
  g.init_stage(2, rng);
  CHECK_THROWS_AS(g.forward(noise_pyramid(1, dims), 1), Error);  // not grown yet
  CHECK_NOTHROW(g.forward(noise_pyramid(1, dims), 2));
  auto wrong = dims;
  wrong[0].width += 1;
  CHECK_THROWS_AS(g.forward(noise_pyramid(1, wrong), 2), Error);
  const std::vector<Dims> fewer(dims.begin(), dims.end() - 1);
  CHECK_THROWS_AS(g.forward(noise_pyramid(1, fewer), 2), Error);
}

TEST_CASE("forward never mutates weights") {
  const auto dims = dims4();
  Generator g = grown(8, dims, 6);
  const auto before = all_weights(g);
  for (int i = 0; i < 5; ++i) g.forward(noise_pyramid(i, dims), 0);
  CHECK(all_weights(g) == before);

  Critic c(8);
  std::mt19937_64 rng(6);
  c.init(rng);
  std::vector<float> cw;
  for (auto& p : c.parameters()) cw.insert(cw.end(), p.param->value.begin(), p.param->value.end());
  const Tensor x = random_tensor(3, 16, 16, rng);
  c.score(x);
  c.input_gradient(x);
  std::vector<float> cw2;
  for (auto& p : c.parameters()) cw2.insert(cw2.end(), p.param->value.begin(), p.param->value.end());
  CHECK(cw == cw2);
}

TEST_CASE("critic") {
  std::mt19937_64 rng(7);
  Critic c(64);
  c.init(rng);
  CHECK(c.param_count() == 1792 + 3 * 36928 + 577);

  SUBCASE("score map keeps the input dims") {
    const Tensor s = c.score(random_tensor(3, 19, 27, rng));
    CHECK(s.channels == 1);
    CHECK(s.dims() == Dims{19, 27});
  }
  SUBCASE("finite for extreme inputs") {
    for (float v : {-1.0f, 1.0f}) {
      const Tensor s = c.score(Tensor(3, 12, 12, v));
      CHECK(all_finite(s.data));
    }
  }
  SUBCASE("below the receptive field") {
    CHECK_THROWS_AS(c.score(Tensor(3, 10, 40)), Error);
    CHECK_NOTHROW(c.score(Tensor(3, 11, 11)));
  }
  SUBCASE("a critic with constant output gives a constant map") {
    Critic k(4);
    for (auto& p : k.parameters()) std::fill(p.param->value.begin(), p.param->value.end(), 0.0f);
    k.layer(4).bias.value[0] = 0.7f;
    for (float v : k.score(random_tensor(3, 13, 14, rng)).data) CHECK(v == 0.7f);
  }
}

TEST_CASE("critic input gradient matches finite differences") {
  std::mt19937_64 rng(8);
  Critic c(4);
  c.init(rng);
  for (auto& p : c.parameters())
    for (auto& v : p.param->value) v *= 10.0f;
  const Tensor x = random_tensor(3, 11, 12, rng);
  const Tensor g = c.input_gradient(x);
  const oracle::DCritic ref(c);
  const oracle::DTensor dx = oracle::from(x);
  const oracle::DTensor dg = ref.input_gradient(dx);
  double scale = 0;
  for (double v : dg.v) scale = std::max(scale, std::abs(v));
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t i = rng() % x.size();
    const double h = 1e-6;
    oracle::DTensor xp = dx, xm = dx;
    xp.v[i] += h;
    xm.v[i] -= h;
    const double fd = (ref.total_score(xp) - ref.total_score(xm)) / (2 * h);
    CHECK(dg.v[i] == doctest::Approx(fd).epsilon(1e-6).scale(scale));
    CHECK(g.data[i] == doctest::Approx(fd).epsilon(1e-3).scale(scale));
  }
}
