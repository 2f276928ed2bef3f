#include "stegan/stego.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "stegan/error.hpp"

namespace stegan {

StegoModel hide(const ImageU8& cover, std::span<const ImageU8> secrets, std::span<const EmbeddingKey> keys,
                const HideOptions& options, const TrainConfig& cfg, const TrainHooks* hooks) {
  if (secrets.empty() || secrets.size() > 4) {
    fail(ErrorCode::InvalidArgument, "hide: between one and four secrets are supported, got " +
                                         std::to_string(secrets.size()));
  }
  if (keys.size() != secrets.size()) {
    fail(ErrorCode::InvalidArgument, "hide: need one key per secret");
  }
  std::set<Bytes> distinct;
  for (const auto& k : keys) {
    if (!distinct.insert(k.key_bytes).second) fail(ErrorCode::DuplicateKey, "hide: embedding keys must be distinct");
  }
  if (options.obfuscate != !options.shuffle_keys.empty()) {
    fail(ErrorCode::InvalidArgument, "hide: shuffle keys must be given exactly when obfuscating");
  }
  if (options.obfuscate && options.shuffle_keys.size() != secrets.size()) {
    fail(ErrorCode::InvalidArgument, "hide: need one shuffle key per secret");
  }

  std::vector<ImageU8> prepared;
  prepared.reserve(secrets.size());
  for (std::size_t t = 0; t < secrets.size(); ++t) {
    ImageU8 s = resize(secrets[t], cover.height, cover.width);
    if (options.obfuscate) {
      const auto perm = shuffle_permutation(options.shuffle_keys[t], static_cast<std::size_t>(s.height) * s.width);
      s = shuffle_image(s, perm);
    }
    prepared.push_back(std::move(s));
  }
  TrainConfig run = cfg;
  run.secrets = static_cast<int>(secrets.size());
  StegoModel model = train(cover, prepared, keys, run, hooks).model;
  model.obfuscated = options.obfuscate;
  model.shuffle_scheme = options.obfuscate ? std::string(kShuffleScheme) : std::string();
  return model;
}

ImageU8 extract(const StegoModel& model, const EmbeddingKey& key, const ShuffleKey* shuffle_key) {
  if (key.scheme_id != model.noise_scheme) {
    fail(ErrorCode::SchemeMismatch, "extract: key scheme '" + key.scheme_id + "' does not match model scheme '" +
                                        model.noise_scheme + "'");
  }
  if (model.generator.grown_stage() != 0) fail(ErrorCode::InvalidArgument, "extract: model is not fully trained");
  if (model.obfuscated && !shuffle_key) {
    fail(ErrorCode::InvalidArgument, "extract: model holds an obfuscated secret; a shuffle key is required");
  }
  if (model.obfuscated && shuffle_key->scheme_id != model.shuffle_scheme) {
    fail(ErrorCode::SchemeMismatch, "extract: shuffle scheme mismatch");
  }
  const NoisePyramid z = noise_pyramid(key, model.generator.dims());
  ImageU8 out = quantize(model.generator.forward(z, 0));
  if (model.obfuscated) {
    out = unshuffle_image(out, shuffle_permutation(*shuffle_key, static_cast<std::size_t>(out.height) * out.width));
  }
  return out;
}

ImageU8 sample(const StegoModel& model, std::uint64_t sample_seed) {
  const NoisePyramid z = noise_pyramid(sample_seed, model.generator.dims(), NoiseStream::Sampling);
  return quantize(model.generator.forward(z, model.generator.grown_stage()));
}

ImageU8 sample(const StegoModel& model, std::uint64_t sample_seed, Dims size) {
  const Dims base = model.image_dims();
  if (size == base) return sample(model, sample_seed);
  if (size.height < 1 || size.width < 1) fail(ErrorCode::InvalidArgument, "sample: size must be positive");
  std::vector<Dims> dims;
  for (const Dims& d : model.generator.dims()) {
    dims.push_back({std::max(1, static_cast<int>(std::lround(static_cast<double>(d.height) * size.height / base.height))),
                    std::max(1, static_cast<int>(std::lround(static_cast<double>(d.width) * size.width / base.width)))});
  }
  dims.front() = size;
  const NoisePyramid z = noise_pyramid(sample_seed, dims, NoiseStream::Sampling);
  return quantize(model.generator.forward_resized(z));
}

}  // namespace stegan
