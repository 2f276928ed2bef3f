#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "oracle.hpp"
#include "stegan/error.hpp"
#include "stegan/png_io.hpp"
#include "stegan/pyramid.hpp"
#include "stegan/stego.hpp"
#include "stegan/trainer.hpp"

using namespace stegan;

namespace {

struct SumCritic {
  Tensor input_gradient(const Tensor& x) const { return Tensor(x.channels, x.height, x.width, 1.0f); }
};
struct ConstantCritic {
  Tensor input_gradient(const Tensor& x) const { return Tensor(x.channels, x.height, x.width, 0.0f); }
};

void randomize(std::vector<float>& v, std::mt19937_64& rng, float mean, float sd) {
  std::normal_distribution<float> d(mean, sd);
  for (auto& x : v) x = d(rng);
}

// Tiny 4-channel generator over an 8x8 image with three scales.
nn::Generator tiny_generator(std::mt19937_64& rng) {
  nn::Generator g(4, pyramid_dims(8, 8, 3, 6));
  for (int n = g.coarsest(); n >= 0; --n) g.init_stage(n, rng);
  for (auto& p : g.parameters()) {
    if (p.name.ends_with("weight")) randomize(p.param->value, rng, 0.0f, 0.3f);
    if (p.name.ends_with("bias") || p.name.ends_with("beta")) randomize(p.param->value, rng, 0.0f, 0.1f);
    if (p.name.ends_with("gamma")) randomize(p.param->value, rng, 1.0f, 0.2f);
  }
  g.noise_amp() = {0.3f, 0.5f, 1.0f};
  return g;
}

nn::Critic tiny_critic(std::mt19937_64& rng) {
  nn::Critic c(4);
  for (auto& p : c.parameters()) randomize(p.param->value, rng, 0.0f, 0.4f);
  return c;
}

Tensor random_image(int h, int w, std::mt19937_64& rng) {
  Tensor t(3, h, w);
  randomize(t.data, rng, 0.0f, 0.5f);
  return t;
}

// |analytic - fd| relative to the larger of |fd| and 1% of the gradient scale.
double relative_error(double analytic, double fd, double scale) {
  return std::abs(analytic - fd) / std::max({std::abs(fd), std::abs(analytic), 0.01 * scale});
}

ImageU8 load_data(const char* name) { return read_png(std::string(STEGAN_DATA_DIR) + "/" + name); }

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.stages = 2;
  cfg.coarsest_min_dim = 16;
  cfg.width = 8;
  cfg.iters_per_stage = 12;
  cfg.seed = 42;
  return cfg;
}

ImageU8 gradient_image(int h, int w, int phase) {
  ImageU8 img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<std::uint8_t>((x * 7 + y * 3 + c * 40 + phase) % 256);
  return img;
}

}  // namespace

TEST_CASE("gradient penalty closed forms") {
  std::mt19937_64 rng(1);
  const Tensor real(1, 2, 2, 0.3f), fake(1, 2, 2, -0.2f);
  // sum critic on d = 4 elements: ||grad|| = 2, penalty (2 - 1)^2
  CHECK(gradient_penalty(SumCritic{}, real, fake, rng) == doctest::Approx(1.0));
  CHECK(gradient_penalty(ConstantCritic{}, real, fake, rng) == doctest::Approx(1.0));
  CHECK(gradient_penalty(ConstantCritic{}, real, fake, rng, PenaltyNorm::PerPixel) == doctest::Approx(1.0));
  const Tensor r9(1, 3, 3, 0.0f);
  CHECK(gradient_penalty(SumCritic{}, r9, r9, rng) == doctest::Approx(4.0));
  CHECK(gradient_penalty(SumCritic{}, r9, r9, rng, PenaltyNorm::PerPixel) == doctest::Approx(0.0));
}

TEST_CASE("gradient penalty rejects non-finite gradients") {
  Tensor u(3, 4, 4, 0.1f);
  u.data[5] = NAN;
  CHECK_THROWS_AS(penalty_from_gradient(u, PenaltyNorm::Total), Error);
}

TEST_CASE("interpolate") {
  const Tensor a(3, 2, 2, 1.0f), b(3, 2, 2, -1.0f);
  for (float v : interpolate(a, b, 0.25f).data) CHECK(v == doctest::Approx(-0.5f));
  CHECK_THROWS_AS(interpolate(a, Tensor(3, 2, 3), 0.5f), Error);
}

TEST_CASE("penalty gradient w.r.t. the critic weights matches finite differences") {
  for (PenaltyNorm norm : {PenaltyNorm::Total, PenaltyNorm::PerPixel}) {
    CAPTURE(static_cast<int>(norm));
    std::mt19937_64 rng(2);
    nn::Critic critic = tiny_critic(rng);
    const Tensor x = random_image(11, 11, rng);
    critic.zero_grad();
    gradient_penalty_at(critic, x, norm, true, 1.0f);

    oracle::DCritic ref(critic);
    const oracle::DTensor dx = oracle::from(x);
    const bool per_pixel = norm == PenaltyNorm::PerPixel;
    CHECK(oracle::penalty(ref.input_gradient(dx), per_pixel) ==
          doctest::Approx(gradient_penalty_at(critic, x, norm, false, 1.0f)).epsilon(1e-5));

    double worst = 0, scale = 0;
    std::vector<std::tuple<int, std::size_t, double>> samples;
    for (int l = 0; l < nn::Critic::kLayers; ++l) {
      auto& grad = critic.layer(l).weight.grad;
      for (float g : grad) scale = std::max(scale, static_cast<double>(std::abs(g)));
      for (int s = 0; s < 12; ++s) samples.emplace_back(l, rng() % grad.size(), 0.0);
    }
    for (auto& [l, i, fd] : samples) {
      const double h = 1e-6, w0 = ref.layers[l].w[i];
      ref.layers[l].w[i] = w0 + h;
      const double up = oracle::penalty(ref.input_gradient(dx), per_pixel);
      ref.layers[l].w[i] = w0 - h;
      const double down = oracle::penalty(ref.input_gradient(dx), per_pixel);
      ref.layers[l].w[i] = w0;
      fd = (up - down) / (2 * h);
      worst = std::max(worst, relative_error(critic.layer(l).weight.grad[i], fd, scale));
    }
    CHECK(worst < 1e-3);
    // The penalty does not depend on the biases away from activation kinks.
    for (int l = 0; l < nn::Critic::kLayers; ++l)
      for (float g : critic.layer(l).bias.grad) CHECK(g == 0.0f);
  }
}

TEST_CASE("reconstruction loss gradient matches finite differences") {
  std::mt19937_64 rng(3);
  nn::Generator gen = tiny_generator(rng);
  const auto dims = gen.dims();
  const NoisePyramid z = noise_pyramid(77, dims);
  for (int stage : {2, 0}) {
    CAPTURE(stage);
    const Tensor target = random_image(dims[stage].height, dims[stage].width, rng);
    gen.zero_grad();
    nn::Generator::Trace trace;
    const Tensor out = gen.forward(z, stage, &trace);
    Tensor g(out.channels, out.height, out.width);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = 2.0f * (out.data[i] - target.data[i]) / out.size();
    gen.backward(trace, g, 0);

    oracle::Resampler rs;
    oracle::DGenerator ref(gen);
    CHECK(oracle::mse(ref.forward(z, stage, rs), target) ==
          doctest::Approx(reconstruction_loss(gen, z, target, stage)).epsilon(1e-5));

    auto lib = gen.parameters();
    auto refp = ref.params();
    REQUIRE(lib.size() == refp.size());
    double scale = 0;
    for (auto& p : lib)
      for (float v : p.param->grad) scale = std::max(scale, static_cast<double>(std::abs(v)));
    double worst = 0;
    int checked = 0;
    for (std::size_t k = 0; k < lib.size(); ++k) {
      const auto& grad = lib[k].param->grad;
      const bool used = stage == 0 || lib[k].name.rfind("block0", 0) == 0 || lib[k].name.rfind("head", 0) == 0 ||
                        lib[k].name.rfind("tail", 0) == 0;
      for (int s = 0; s < 4; ++s) {
        const std::size_t i = rng() % grad.size();
        auto& w = (*refp[k])[i];
        const double h = 1e-6, w0 = w;
        w = w0 + h;
        const double up = oracle::mse(ref.forward(z, stage, rs), target);
        w = w0 - h;
        const double down = oracle::mse(ref.forward(z, stage, rs), target);
        w = w0;
        const double fd = (up - down) / (2 * h);
        if (!used) {
          CHECK(grad[i] == 0.0f);
          continue;
        }
        CAPTURE(lib[k].name);
        const double err = relative_error(grad[i], fd, scale);
        CHECK(err < 1e-3);
        worst = std::max(worst, err);
        ++checked;
      }
    }
    CHECK(checked > 20);
    MESSAGE("worst relative error " << worst);
  }
}

TEST_CASE("frozen blocks get no gradient") {
  std::mt19937_64 rng(4);
  nn::Generator gen = tiny_generator(rng);
  const NoisePyramid z = noise_pyramid(5, gen.dims());
  gen.zero_grad();
  nn::Generator::Trace trace;
  const Tensor out = gen.forward(z, 0, &trace);
  gen.backward(trace, Tensor(out.channels, out.height, out.width, 1.0f), 1);
  for (auto* p : gen.block_parameters(0))
    for (float g : p->grad) CHECK(g == 0.0f);
  double moved = 0;
  for (auto* p : gen.block_parameters(1))
    for (float g : p->grad) moved += std::abs(g);
  CHECK(moved > 0);
}

TEST_CASE("reconstruction losses") {
  std::mt19937_64 rng(5);
  nn::Generator gen = tiny_generator(rng);
  const auto dims = gen.dims();
  const NoisePyramid z1 = noise_pyramid(1, dims), z2 = noise_pyramid(2, dims), z3 = noise_pyramid(3, dims);
  const Tensor out1 = gen.forward(z1, 0);

  SUBCASE("zero at the generator output") { CHECK(reconstruction_loss(gen, z1, out1, 0) == 0.0); }
  SUBCASE("constant offset c gives c^2") {
    Tensor t = out1;
    for (auto& v : t.data) v += 0.25f;
    CHECK(reconstruction_loss(gen, z1, t, 0) == doctest::Approx(0.0625).epsilon(1e-6));
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(reconstruction_loss(gen, z1, Tensor(3, 5, 5), 0), Error); }

  const Tensor t1 = random_image(8, 8, rng), t2 = random_image(8, 8, rng), t3 = random_image(8, 8, rng);
  SUBCASE("multi-secret objective reduces to the single one at T = 1") {
    const std::vector<NoisePyramid> zs{z1};
    const std::vector<ImageF> ts{t1};
    CHECK(multi_reconstruction_loss(gen, zs, ts, 0) == reconstruction_loss(gen, z1, t1, 0));
  }
  SUBCASE("identical pairs average to the single loss") {
    const std::vector<NoisePyramid> zs{z1, z1};
    const std::vector<ImageF> ts{t1, t1};
    CHECK(multi_reconstruction_loss(gen, zs, ts, 0) == doctest::Approx(reconstruction_loss(gen, z1, t1, 0)));
  }
  SUBCASE("T = 3 is the mean of the three losses") {
    const double a = reconstruction_loss(gen, z1, t1, 0), b = reconstruction_loss(gen, z2, t2, 0),
                 c = reconstruction_loss(gen, z3, t3, 0);
    const std::vector<NoisePyramid> zs{z1, z2, z3};
    const std::vector<ImageF> ts{t1, t2, t3};
    CHECK(multi_reconstruction_loss(gen, zs, ts, 0) == doctest::Approx((a + b + c) / 3));
  }
  SUBCASE("T = 0 is an error") {
    CHECK_THROWS_AS(multi_reconstruction_loss(gen, std::vector<NoisePyramid>{}, std::vector<ImageF>{}, 0), Error);
  }
}

TEST_CASE("adversarial losses") {
  std::mt19937_64 rng(6);
  nn::Critic critic(4);
  const Tensor real = random_image(12, 12, rng), fake = random_image(12, 12, rng);
  SUBCASE("critic identically zero") {
    const auto l = adversarial_losses(critic, real, fake, 0.1, rng);
    CHECK(l.critic_loss == doctest::Approx(0.1));
    CHECK(l.gen_loss == 0.0);
  }
  critic = tiny_critic(rng);
  SUBCASE("real = fake leaves only the penalty") {
    const auto l = adversarial_losses(critic, real, real, 0.1, rng);
    CHECK(l.critic_loss == doctest::Approx(0.1 * l.penalty));
  }
  SUBCASE("uniform score shift moves the generator loss by -delta") {
    const auto before = adversarial_losses(critic, real, fake, 0.1, rng);
    critic.layer(4).bias.value[0] += 0.5f;
    const auto after = adversarial_losses(critic, real, fake, 0.1, rng);
    CHECK(after.gen_loss - before.gen_loss == doctest::Approx(-0.5).epsilon(1e-5));
  }
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  CHECK(learning_rate_at(cfg, 0) == cfg.lr);
  CHECK(learning_rate_at(cfg, 1599) == cfg.lr);
  CHECK(learning_rate_at(cfg, 1600) == doctest::Approx(0.1 * cfg.lr));
  cfg.iters_per_stage = 7;  // ceil(5.6) = 6
  CHECK(learning_rate_at(cfg, 5) == cfg.lr);
  CHECK(learning_rate_at(cfg, 6) == doctest::Approx(0.1 * cfg.lr));
}

TEST_CASE("default configuration") {
  const TrainConfig cfg;
  CHECK(cfg.lambda == 10.0);
  CHECK(cfg.gp_coeff == 0.1);
  CHECK(cfg.lr == 5e-4);
  CHECK(cfg.lr_decay == 0.1);
  CHECK(cfg.decay_at_fraction == 0.8);
  CHECK(cfg.iters_per_stage == 2000);
  CHECK(cfg.stages == 6);
  CHECK(cfg.trainable_block_window == 3);
  CHECK_NOTHROW(cfg.validate());
  for (auto mutate : std::vector<void (*)(TrainConfig&)>{[](TrainConfig& c) { c.lambda = 0; },
                                                         [](TrainConfig& c) { c.gp_coeff = -1; },
                                                         [](TrainConfig& c) { c.decay_at_fraction = 1.0; },
                                                         [](TrainConfig& c) { c.decay_at_fraction = 0.0; },
                                                         [](TrainConfig& c) { c.iters_per_stage = 0; },
                                                         [](TrainConfig& c) { c.secrets = -1; }}) {
    TrainConfig bad;
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), Error);
  }
}

TEST_CASE("adam step") {
  nn::Parameter p(2);
  p.value = {1.0f, -2.0f};
  p.grad = {0.5f, -0.25f};
  nn::Parameter q(1);
  q.value = {3.0f};
  q.grad = {1.0f};
  Adam opt({{{&p}, 1.0}, {{&q}, 0.1}}, 0.5, 0.999);
  opt.step(0.01);
  // First step: m_hat = g, v_hat = g^2, so each weight moves by lr * sign(g).
  CHECK(p.value[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(p.value[1] == doctest::Approx(-1.99).epsilon(1e-6));
  CHECK(q.value[0] == doctest::Approx(2.999).epsilon(1e-6));
  // Second step with the same gradient: m = 0.75 g, v = 0.001999 g^2.
  opt.step(0.01);
  const double m_hat = 0.75 / 0.75, v_hat = (0.000999 + 0.001) / (1 - 0.999 * 0.999);
  CHECK(p.value[0] == doctest::Approx(0.99 - 0.01 * m_hat * 0.5 / (std::sqrt(v_hat) * 0.5 + 1e-8)).epsilon(1e-6));
  CHECK(opt.steps() == 2);
}

TEST_CASE("train_stage keeps old blocks frozen") {
  TrainConfig cfg;
  cfg.stages = 5;
  cfg.coarsest_min_dim = 12;
  cfg.width = 8;
  cfg.iters_per_stage = 3;
  const ImageU8 cover = gradient_image(24, 24, 0), secret = gradient_image(24, 24, 90);
  const ImagePyramid cover_pyr = build_pyramid(dequantize(cover), cfg.stages, cfg.coarsest_min_dim);
  const std::vector<ImagePyramid> targets{build_pyramid(dequantize(secret), cfg.stages, cfg.coarsest_min_dim)};
  const std::vector<NoisePyramid> keyed{noise_pyramid(EmbeddingKey::from_string("k"), cover_pyr.dims())};

  StegoModel model;
  model.generator = nn::Generator(cfg.width, cover_pyr.dims());
  nn::Critic critic(cfg.width);
  std::mt19937_64 rng(0);
  critic.init(rng);
  auto snapshot = [&](int block) {
    std::vector<float> out;
    for (auto* p : model.generator.block_parameters(block)) out.insert(out.end(), p->value.begin(), p->value.end());
    return out;
  };
  for (int n = 4; n >= 1; --n) train_stage(model, critic, cover_pyr, targets, keyed, n, cfg, rng);
  REQUIRE(model.generator.block_count() == 4);
  const auto b0 = snapshot(0), b1 = snapshot(1), b2 = snapshot(2);
  train_stage(model, critic, cover_pyr, targets, keyed, 0, cfg, rng);
  REQUIRE(model.generator.block_count() == 5);
  CHECK(snapshot(0) == b0);
  CHECK(snapshot(1) == b1);
  CHECK(snapshot(2) != b2);
  CHECK(model.generator.noise_amp()[0] > 0.0f);
  CHECK(model.generator.noise_amp()[4] == 1.0f);

  SUBCASE("a stage cannot be skipped") {
    StegoModel fresh;
    fresh.generator = nn::Generator(cfg.width, cover_pyr.dims());
    CHECK_THROWS_AS(train_stage(fresh, critic, cover_pyr, targets, keyed, 2, cfg, rng), Error);
  }
}

TEST_CASE("reconstruction loss descends on a 64x64 pair over 300 iterations") {
  TrainConfig cfg;
  cfg.stages = 4;
  cfg.iters_per_stage = 300;
  const ImageU8 cover = load_data("cover_chelsea_64.png"), secret = load_data("secret_astronaut_64.png");
  const ImagePyramid cover_pyr = build_pyramid(dequantize(cover), cfg.stages, cfg.coarsest_min_dim);
  const std::vector<ImagePyramid> targets{build_pyramid(dequantize(secret), cfg.stages, cfg.coarsest_min_dim)};
  const std::vector<NoisePyramid> keyed{noise_pyramid(EmbeddingKey::from_string("smoke"), cover_pyr.dims())};
  StegoModel model;
  model.generator = nn::Generator(cfg.width, cover_pyr.dims());
  nn::Critic critic(cfg.width);
  std::mt19937_64 rng(1);
  critic.init(rng);
  const StageStats s = train_stage(model, critic, cover_pyr, targets, keyed, 3, cfg, rng);
  MESSAGE("rec loss " << s.rec_loss_start << " -> " << s.rec_loss_end);
  CHECK(s.rec_loss_end < s.rec_loss_start);
  CHECK(s.rec_loss_end < 0.1 * s.rec_loss_start);
}

TEST_CASE("training is deterministic") {
  const TrainConfig cfg = small_config();
  const ImageU8 cover = gradient_image(32, 32, 0);
  const std::vector<ImageU8> secrets{gradient_image(32, 32, 120)};
  const std::vector<EmbeddingKey> keys{EmbeddingKey::from_string("det")};
  const TrainResult a = train(cover, secrets, keys, cfg);
  const TrainResult b = train(cover, secrets, keys, cfg);
  CHECK(save(a.model) == save(b.model));
  CHECK(extract(a.model, keys[0]) == extract(b.model, keys[0]));
}

TEST_CASE("train argument validation") {
  const TrainConfig cfg = small_config();
  const ImageU8 cover = gradient_image(32, 32, 0), s = gradient_image(32, 32, 50);
  auto code_of = [&](std::vector<ImageU8> secrets, std::vector<EmbeddingKey> keys) {
    try {
      train(cover, secrets, keys, cfg);
    } catch (const Error& e) {
      return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
  };
  CHECK(code_of({s, s}, {EmbeddingKey::from_string("a")}) == ErrorCode::InvalidArgument);
  CHECK(code_of({s, s}, {EmbeddingKey::from_string("a"), EmbeddingKey::from_string("a")}) == ErrorCode::DuplicateKey);
  std::vector<EmbeddingKey> five;
  for (int i = 0; i < 5; ++i) five.push_back(EmbeddingKey::from_string(std::to_string(i)));
  CHECK(code_of({s, s, s, s, s}, five) == ErrorCode::InvalidArgument);
  EmbeddingKey odd = EmbeddingKey::from_string("x");
  odd.scheme_id = "other";
  CHECK(code_of({s}, {odd}) == ErrorCode::SchemeMismatch);
}

TEST_CASE("secrets of other sizes are resized to the cover") {
  TrainConfig cfg = small_config();
  cfg.iters_per_stage = 2;
  const std::vector<ImageU8> secrets{gradient_image(20, 45, 7)};
  const std::vector<EmbeddingKey> keys{EmbeddingKey::from_string("r")};
  const TrainResult r = train(gradient_image(32, 32, 0), secrets, keys, cfg);
  CHECK(extract(r.model, keys[0]).dims() == Dims{32, 32});
}

TEST_CASE("divergence is reported") {
  TrainConfig cfg = small_config();
  cfg.lr = 1e4;
  cfg.iters_per_stage = 40;
  const std::vector<ImageU8> secrets{gradient_image(32, 32, 120)};
  const std::vector<EmbeddingKey> keys{EmbeddingKey::from_string("boom")};
  try {
    train(gradient_image(32, 32, 0), secrets, keys, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Divergence);
    CHECK(std::string(e.what()).find("stage") != std::string::npos);
  }
}

TEST_CASE("training log and checkpoint hooks") {
  TrainConfig cfg = small_config();
  cfg.iters_per_stage = 6;
  std::ostringstream log;
  int checkpoints = 0, stages_done = 0;
  TrainHooks hooks;
  hooks.log = &log;
  hooks.log_every = 2;
  hooks.checkpoint_every = 3;
  hooks.checkpoint = [&](const StegoModel& m, int, int) {
    ++checkpoints;
    CHECK_NOTHROW(load(save(m)));
  };
  hooks.stage_done = [&](const StageStats&) { ++stages_done; };
  train(gradient_image(32, 32, 0), {}, {}, cfg, &hooks);
  CHECK(checkpoints == 4);
  CHECK(stages_done == 2);
  std::istringstream lines(log.str());
  std::string line;
  int records = 0, stage_records = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    REQUIRE(j.contains("event"));
    if (j["event"] == "stage") ++stage_records;
    ++records;
  }
  CHECK(stage_records == 2);
  CHECK(records > 6);
}
