#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stegan/image.hpp"
#include "stegan/tensor.hpp"

namespace stegan {

inline constexpr std::string_view kNoiseScheme = "cbrng-bm-v1";
inline constexpr std::string_view kShuffleScheme = "fy-v1";

using Bytes = std::vector<std::uint8_t>;

Bytes to_bytes(std::string_view text);

// Shared secret seeding the extraction noise.
struct EmbeddingKey {
  Bytes key_bytes;
  std::string scheme_id{kNoiseScheme};

  static EmbeddingKey from_string(std::string_view text) { return {to_bytes(text), std::string(kNoiseScheme)}; }
  friend bool operator==(const EmbeddingKey&, const EmbeddingKey&) = default;
};

// Shared secret seeding the pixel-scrambling permutation.
struct ShuffleKey {
  Bytes key_bytes;
  std::string scheme_id{kShuffleScheme};

  static ShuffleKey from_string(std::string_view text) { return {to_bytes(text), std::string(kShuffleScheme)}; }
  friend bool operator==(const ShuffleKey&, const ShuffleKey&) = default;
};

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);

// First 8 bytes (big-endian) of SHA-256(key_bytes). Throws on an empty key.
std::uint64_t derive_seed(std::span<const std::uint8_t> key_bytes);
std::uint64_t derive_seed(const EmbeddingKey& key);
std::uint64_t derive_seed(const ShuffleKey& key);

// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Stream identifiers occupying the upper counter word.
enum class NoiseStream : std::uint32_t {
  Keyed = 0,
  Permutation = 1,
  Sampling = 2,
  Training = 3,
};

// One single-channel map per pyramid level; maps[n] is scale n.
struct NoisePyramid {
  std::vector<Tensor> maps;

  int levels() const { return static_cast<int>(maps.size()); }
  std::vector<Dims> dims() const;
};

// Standard normals from the counter-based generator: global element index e
// runs over all levels coarsest-first, row-major. Pair j = e / 2 takes one
// Philox block with counter (j_lo, j_hi, substream, stream) and key
// (seed_lo, seed_hi); words (0,1) and (2,3) form two 53-bit uniforms
// u1 in (0, 1], u2 in [0, 1), and Box-Muller gives
// (sqrt(-2 ln u1) cos 2pi u2, sqrt(-2 ln u1) sin 2pi u2) for (2j, 2j+1).
NoisePyramid noise_pyramid(std::uint64_t seed, std::span<const Dims> dims,
                           NoiseStream stream = NoiseStream::Keyed, std::uint32_t substream = 0);

// Keyed extraction noise. Throws SchemeMismatch for unknown schemes.
NoisePyramid noise_pyramid(const EmbeddingKey& key, std::span<const Dims> dims);

// Fisher-Yates over [0, n) driven by 32-bit words from Philox with counter
// (i_lo, i_hi, 0, Permutation) read in order; bounded draws use rejection
// below the largest multiple of the bound.
std::vector<std::uint32_t> shuffle_permutation(const ShuffleKey& key, std::size_t n);
std::vector<std::uint32_t> invert_permutation(std::span<const std::uint32_t> perm);

// out pixel i = in pixel perm[i], identically for all channels.
ImageU8 shuffle_image(const ImageU8& img, std::span<const std::uint32_t> perm);
// Exact inverse of shuffle_image.
ImageU8 unshuffle_image(const ImageU8& img, std::span<const std::uint32_t> perm);

}  // namespace stegan
