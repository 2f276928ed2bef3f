#include "stegan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <string>

#include <json.hpp>

#include "stegan/error.hpp"
#include "stegan/simd/kernels.hpp"

namespace stegan {
namespace {

constexpr double kDivergenceLimit = 1e6;
constexpr std::uint32_t kFixedNoiseSubstream = 0xFFFFFFFFu;

void check_loss(double v, const char* what, int stage, int iter) {
  if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit) {
    fail(ErrorCode::Divergence, std::string("training diverged: ") + what + " = " + std::to_string(v) +
                                    " at stage " + std::to_string(stage) + ", iteration " + std::to_string(iter));
  }
}

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (float v : t.data) s += v;
  return s / static_cast<double>(t.size());
}

std::vector<Dims> model_dims(const StegoModel& m) { return m.generator.dims(); }

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::InvalidArgument, "train config: " + msg); };
  if (!(lambda > 0)) bad("lambda must be > 0");
  if (!(gp_coeff > 0)) bad("gp_coeff must be > 0");
  if (!(lr > 0)) bad("lr must be > 0");
  if (!(decay_at_fraction > 0 && decay_at_fraction < 1)) bad("decay_at_fraction must be in (0, 1)");
  if (iters_per_stage < 1) bad("iters_per_stage must be >= 1");
  if (stages < 1) bad("stages must be >= 1");
  if (trainable_block_window < 1) bad("trainable_block_window must be >= 1");
  if (secrets < 0) bad("secrets must be >= 0");
  if (width < 1) bad("width must be >= 1");
  if (critic_steps < 1) bad("critic_steps must be >= 1");
}

double learning_rate_at(const TrainConfig& cfg, int iter) {
  const int decay_iter = static_cast<int>(std::ceil(cfg.decay_at_fraction * cfg.iters_per_stage));
  return iter >= decay_iter ? cfg.lr * cfg.lr_decay : cfg.lr;
}

double penalty_from_gradient(const Tensor& u, PenaltyNorm norm, Tensor* dpenalty_du) {
  if (!all_finite(u.data)) fail(ErrorCode::NonFinite, "gradient penalty: non-finite critic input gradient");
  if (dpenalty_du) *dpenalty_du = Tensor(u.channels, u.height, u.width);
  if (norm == PenaltyNorm::Total) {
    const double len = std::sqrt(simd::kernels().dot(u.data.data(), u.data.data(), u.size()));
    if (dpenalty_du && len > 0) {
      const float s = static_cast<float>(2.0 * (len - 1.0) / len);
      for (std::size_t i = 0; i < u.size(); ++i) dpenalty_du->data[i] = s * u.data[i];
    }
    return (len - 1.0) * (len - 1.0);
  }
  const std::size_t hw = u.plane();
  double total = 0.0;
  for (std::size_t p = 0; p < hw; ++p) {
    double sq = 0.0;
    for (int c = 0; c < u.channels; ++c) sq += static_cast<double>(u.data[c * hw + p]) * u.data[c * hw + p];
    const double len = std::sqrt(sq);
    total += (len - 1.0) * (len - 1.0);
    if (dpenalty_du && len > 0) {
      const float s = static_cast<float>(2.0 * (len - 1.0) / len / static_cast<double>(hw));
      for (int c = 0; c < u.channels; ++c) dpenalty_du->data[c * hw + p] = s * u.data[c * hw + p];
    }
  }
  return total / static_cast<double>(hw);
}

Tensor interpolate(const Tensor& real, const Tensor& fake, float eps) {
  if (!real.same_shape(fake)) fail(ErrorCode::DimensionMismatch, "gradient penalty: real/fake shape mismatch");
  Tensor x(real.channels, real.height, real.width);
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = eps * real.data[i] + (1.0f - eps) * fake.data[i];
  return x;
}

double gradient_penalty_at(nn::Critic& critic, const Tensor& x, PenaltyNorm norm, bool accumulate, float scale) {
  nn::Critic::InputGradTrace trace;
  const Tensor u = critic.input_gradient(x, &trace);
  Tensor v;
  const double p = penalty_from_gradient(u, norm, accumulate ? &v : nullptr);
  if (accumulate) {
    for (float& e : v.data) e *= scale;
    critic.accumulate_penalty_grad(trace, v);
  }
  return p;
}

AdversarialLosses adversarial_losses(const nn::Critic& critic, const Tensor& real, const Tensor& fake,
                                     double gp_coeff, std::mt19937_64& rng, PenaltyNorm norm) {
  if (!real.same_shape(fake)) fail(ErrorCode::DimensionMismatch, "adversarial_losses: real/fake shape mismatch");
  const double d_real = mean_of(critic.score(real));
  const double d_fake = mean_of(critic.score(fake));
  const double gp = gradient_penalty(critic, real, fake, rng, norm);
  return {d_fake - d_real + gp_coeff * gp, -d_fake, gp};
}

double reconstruction_loss(const nn::Generator& gen, const NoisePyramid& keyed, const ImageF& target, int n) {
  const Tensor out = gen.forward(keyed, n);
  if (!out.same_shape(target)) fail(ErrorCode::DimensionMismatch, "reconstruction_loss: target shape mismatch");
  return mean_squared_error(out, target);
}

double multi_reconstruction_loss(const nn::Generator& gen, std::span<const NoisePyramid> noises,
                                 std::span<const ImageF> targets, int n) {
  if (noises.empty()) fail(ErrorCode::InvalidArgument, "multi_reconstruction_loss: need at least one pair");
  if (noises.size() != targets.size()) {
    fail(ErrorCode::InvalidArgument, "multi_reconstruction_loss: noise/target count mismatch");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < noises.size(); ++t) total += reconstruction_loss(gen, noises[t], targets[t], n);
  return total / static_cast<double>(noises.size());
}

Adam::Adam(std::vector<Group> groups, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto& g : groups) {
    for (nn::Parameter* p : g.params) {
      slots_.push_back({p, g.lr_scale, std::vector<float>(p->size(), 0.0f), std::vector<float>(p->size(), 0.0f)});
    }
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  const auto& k = simd::kernels();
  for (auto& s : slots_) {
    const float step_size = static_cast<float>(lr * s.lr_scale / bc1);
    k.adam(s.param->value.data(), s.param->grad.data(), s.m.data(), s.v.data(), s.param->size(), step_size,
           static_cast<float>(beta1_), static_cast<float>(beta2_), static_cast<float>(1.0 / bc2),
           static_cast<float>(eps_));
  }
}

namespace {

Adam make_generator_optimizer(nn::Generator& gen, const TrainConfig& cfg, int first_trainable) {
  std::vector<Adam::Group> groups;
  const int newest = gen.block_count() - 1;
  for (int j = first_trainable; j <= newest; ++j) {
    groups.push_back({gen.block_parameters(j), std::pow(cfg.block_lr_scale, newest - j)});
  }
  auto& h = gen.head();
  groups.push_back({{&h.conv.weight, &h.conv.bias, &h.norm.gamma, &h.norm.beta},
                    std::pow(cfg.block_lr_scale, newest - first_trainable)});
  groups.push_back({{&gen.tail().weight, &gen.tail().bias}, 1.0});
  return Adam(std::move(groups), cfg.beta1, cfg.beta2);
}

Adam make_critic_optimizer(nn::Critic& critic, const TrainConfig& cfg) {
  std::vector<nn::Parameter*> params;
  for (auto& p : critic.parameters()) params.push_back(p.param);
  return Adam({{std::move(params), 1.0}}, cfg.beta1, cfg.beta2);
}

// sqrt of the mean (over targets) MSE between the upsampled stage n+1 output
// and level n of each target.
float upsampled_rmse(const nn::Generator& gen, std::span<const ImagePyramid> targets,
                     std::span<const NoisePyramid> keyed, int n) {
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Tensor prev = gen.forward(keyed[t], n + 1);
    const ImageF& tgt = targets[t].levels[n];
    total += mean_squared_error(resample(prev, tgt.height, tgt.width), tgt);
  }
  return static_cast<float>(std::sqrt(total / static_cast<double>(targets.size())));
}

void write_record(std::ostream& os, const nlohmann::json& j) { os << j.dump() << '\n' << std::flush; }

}  // namespace

StageStats train_stage(StegoModel& model, nn::Critic& critic, const ImagePyramid& cover,
                       std::span<const ImagePyramid> targets, std::span<const NoisePyramid> keyed, int n,
                       const TrainConfig& cfg, std::mt19937_64& rng, const TrainHooks* hooks) {
  cfg.validate();
  nn::Generator& gen = model.generator;
  if (targets.empty() || targets.size() != keyed.size()) {
    fail(ErrorCode::InvalidArgument, "train_stage: need matching non-empty target and noise lists");
  }
  if (gen.grown_stage() == n + 1) gen.init_stage(n, rng);
  if (gen.grown_stage() != n) {
    fail(ErrorCode::InvalidArgument, "train_stage: generator is at stage " + std::to_string(gen.grown_stage()) +
                                         ", cannot train stage " + std::to_string(n));
  }
  if (cover.stage_count() != gen.scale_count()) fail(ErrorCode::DimensionMismatch, "train_stage: cover pyramid");

  gen.noise_amp()[n] = n == gen.coarsest() ? 1.0f : upsampled_rmse(gen, targets, keyed, n);

  const int first_trainable = std::max(0, gen.block_count() - cfg.trainable_block_window);
  Adam gen_opt = make_generator_optimizer(gen, cfg, first_trainable);
  Adam critic_opt = make_critic_optimizer(critic, cfg);

  const ImageF& real = cover.levels[n];
  const std::size_t T = targets.size();
  std::vector<const ImageF*> target_level(T);
  for (std::size_t t = 0; t < T; ++t) target_level[t] = &targets[t].levels[n];

  auto rec_loss_now = [&] {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += reconstruction_loss(gen, keyed[t], *target_level[t], n);
    return s / static_cast<double>(T);
  };

  StageStats stats;
  stats.stage = n;
  stats.noise_amp = gen.noise_amp()[n];
  stats.rec_loss_start = rec_loss_now();

  const auto dims = model_dims(model);
  const double inv_area = 1.0 / static_cast<double>(real.plane());
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  const std::uint64_t noise_seed = rng();

  double critic_loss = 0.0, gen_loss = 0.0, rec_loss = 0.0;
  for (int it = 0; it < cfg.iters_per_stage; ++it) {
    const double lr = learning_rate_at(cfg, it);
    const NoisePyramid z = noise_pyramid(noise_seed, dims, NoiseStream::Training, static_cast<std::uint32_t>(it));
    nn::Generator::Trace fake_trace;
    const Tensor fake = gen.forward(z, n, &fake_trace);

    for (int step = 0; step < cfg.critic_steps; ++step) {
      critic.zero_grad();
      nn::Critic::Trace real_trace, fake_ctrace;
      const Tensor s_real = critic.forward(real, &real_trace);
      const Tensor s_fake = critic.forward(fake, &fake_ctrace);
      critic.backward(real_trace, Tensor(1, real.height, real.width, static_cast<float>(-inv_area)), false, true);
      critic.backward(fake_ctrace, Tensor(1, real.height, real.width, static_cast<float>(inv_area)), false, true);
      const Tensor x = interpolate(real, fake, unit(rng));
      const double gp = gradient_penalty_at(critic, x, cfg.penalty_norm, true, static_cast<float>(cfg.gp_coeff));
      critic_loss = mean_of(s_fake) - mean_of(s_real) + cfg.gp_coeff * gp;
      check_loss(critic_loss, "critic loss", n, it);
      critic_opt.step(lr);
    }

    gen.zero_grad();
    {
      nn::Critic::Trace ctrace;
      const Tensor s_fake = critic.forward(fake, &ctrace);
      gen_loss = -mean_of(s_fake);
      const Tensor g_fake =
          critic.backward(ctrace, Tensor(1, fake.height, fake.width, static_cast<float>(-inv_area)), true, false);
      gen.backward(fake_trace, g_fake, first_trainable);
    }
    rec_loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      nn::Generator::Trace rtrace;
      const Tensor rec = gen.forward(keyed[t], n, &rtrace);
      const ImageF& tgt = *target_level[t];
      rec_loss += mean_squared_error(rec, tgt) / static_cast<double>(T);
      Tensor g(rec.channels, rec.height, rec.width);
      const float scale = static_cast<float>(cfg.lambda * 2.0 / (static_cast<double>(T) * rec.size()));
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = scale * (rec.data[i] - tgt.data[i]);
      gen.backward(rtrace, g, first_trainable);
    }
    check_loss(gen_loss + cfg.lambda * rec_loss, "generator loss", n, it);
    gen_opt.step(lr);

    if (hooks && hooks->log && hooks->log_every > 0 && (it % hooks->log_every == 0 || it + 1 == cfg.iters_per_stage)) {
      write_record(*hooks->log, {{"event", "iter"},
                                 {"stage", n},
                                 {"iter", it},
                                 {"lr", lr},
                                 {"critic_loss", critic_loss},
                                 {"gen_loss", gen_loss},
                                 {"rec_loss", rec_loss}});
    }
    if (hooks && hooks->checkpoint && hooks->checkpoint_every > 0 && (it + 1) % hooks->checkpoint_every == 0) {
      hooks->checkpoint(model, n, it + 1);
    }
  }

  stats.rec_loss_end = rec_loss_now();
  stats.critic_loss_end = critic_loss;
  stats.gen_loss_end = gen_loss;
  if (hooks && hooks->log) {
    write_record(*hooks->log, {{"event", "stage"},
                               {"stage", n},
                               {"noise_amp", stats.noise_amp},
                               {"rec_loss_start", stats.rec_loss_start},
                               {"rec_loss_end", stats.rec_loss_end}});
  }
  if (hooks && hooks->stage_done) hooks->stage_done(stats);
  return stats;
}

TrainResult train(const ImageU8& cover, std::span<const ImageU8> secrets, std::span<const EmbeddingKey> keys,
                  const TrainConfig& cfg, const TrainHooks* hooks) {
  cfg.validate();
  if (secrets.size() != keys.size()) {
    fail(ErrorCode::InvalidArgument, "train: " + std::to_string(secrets.size()) + " secrets but " +
                                         std::to_string(keys.size()) + " keys");
  }
  if (secrets.size() > 4) fail(ErrorCode::InvalidArgument, "train: at most four secrets are supported");
  {
    std::set<Bytes> seen;
    for (const auto& k : keys) {
      if (k.key_bytes.empty()) fail(ErrorCode::InvalidArgument, "train: empty embedding key");
      if (k.scheme_id != kNoiseScheme) fail(ErrorCode::SchemeMismatch, "train: unsupported noise scheme " + k.scheme_id);
      if (!seen.insert(k.key_bytes).second) fail(ErrorCode::DuplicateKey, "train: duplicate embedding key");
    }
  }

  const ImageF cover_f = dequantize(cover);
  const ImagePyramid cover_pyr = build_pyramid(cover_f, cfg.stages, cfg.coarsest_min_dim);
  const auto dims = cover_pyr.dims();

  std::vector<ImagePyramid> targets;
  std::vector<NoisePyramid> keyed;
  if (secrets.empty()) {
    targets.push_back(cover_pyr);
    keyed.push_back(noise_pyramid(cfg.seed, dims, NoiseStream::Training, kFixedNoiseSubstream));
  } else {
    for (std::size_t t = 0; t < secrets.size(); ++t) {
      const ImageF s = dequantize(resize(secrets[t], cover.height, cover.width));
      targets.push_back(build_pyramid(s, cfg.stages, cfg.coarsest_min_dim));
      keyed.push_back(noise_pyramid(keys[t], dims));
    }
  }

  std::mt19937_64 rng(cfg.seed);
  TrainResult result{StegoModel{}, nn::Critic(cfg.width), {}};
  result.model.generator = nn::Generator(cfg.width, dims);
  result.model.ratio = cover_pyr.ratio;
  result.critic.init(rng);
  if (hooks && hooks->log) {
    write_record(*hooks->log, {{"event", "start"},
                               {"secrets", secrets.size()},
                               {"stages", cfg.stages},
                               {"iters_per_stage", cfg.iters_per_stage},
                               {"height", cover.height},
                               {"width", cover.width},
                               {"isa", std::string(simd::isa_name(simd::active_isa()))}});
  }
  for (int n = cfg.stages - 1; n >= 0; --n) {
    result.stages.push_back(
        train_stage(result.model, result.critic, cover_pyr, targets, keyed, n, cfg, rng, hooks));
  }
  return result;
}

}  // namespace stegan
