#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stegan/image.hpp"
#include "stegan/keynoise.hpp"
#include "stegan/model.hpp"
#include "stegan/trainer.hpp"

namespace stegan {

// Model container (.sgn), all integers little-endian:
//
//   magic            8 bytes  "STEGOSGN"
//   format_version   u32      kModelFormatVersion
//   header_bytes     u32      size of the header section below
//   header:
//     scale_count S  u32
//     width          u32      hidden channels
//     ratio          f64
//     dims           S x (u32 height, u32 width), scale 0 (finest) first
//     noise_amp      S x f32
//     blocks         u32
//     noise_scheme   u16 length + bytes
//     obfuscated     u8
//     shuffle_scheme u16 length + bytes (empty unless obfuscated)
//   tensor_count     u32
//   tensors          tensor_count x (u16 name length, name, u32 count, count x f32)
//   checksum         32 bytes SHA-256 of every preceding byte
//
// Tensors follow nn::Generator::parameters() order; conv weights are
// (out, in, 3, 3) row-major.
inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[9] = "STEGOSGN";

Bytes save(const StegoModel& model);
StegoModel load(std::span<const std::uint8_t> bytes);

void save_file(const std::filesystem::path& path, const StegoModel& model);
StegoModel load_file(const std::filesystem::path& path);

struct HideOptions {
  bool obfuscate = false;
  std::vector<ShuffleKey> shuffle_keys;  // one per secret iff obfuscate
};

// Trains a stego model hiding 1..4 secrets, each recoverable with its own key.
// Secrets are resized to the cover and, if obfuscating, scrambled with their
// shuffle keys before training.
StegoModel hide(const ImageU8& cover, std::span<const ImageU8> secrets, std::span<const EmbeddingKey> keys,
                const HideOptions& options, const TrainConfig& cfg, const TrainHooks* hooks = nullptr);

// One forward pass with the keyed noise. An obfuscated model requires the
// shuffle key of the secret being extracted.
ImageU8 extract(const StegoModel& model, const EmbeddingKey& key, const ShuffleKey* shuffle_key = nullptr);

// Unconditional sample from random noise seeded by sample_seed, at the cover
// dims.
ImageU8 sample(const StegoModel& model, std::uint64_t sample_seed);

// Unconditional sample of another size: every pyramid level is scaled by
// size / cover dims (per axis, at least 1 px).
ImageU8 sample(const StegoModel& model, std::uint64_t sample_seed, Dims size);

}  // namespace stegan
