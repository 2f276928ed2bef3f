#include "stegan/keynoise.hpp"

#include <openssl/sha.h>

#include <cmath>
#include <numbers>
#include <string>

#include "stegan/error.hpp"

namespace stegan {

Bytes to_bytes(std::string_view text) { return Bytes(text.begin(), text.end()); }

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
  std::array<std::uint8_t, 32> digest{};
  SHA256(data.data(), data.size(), digest.data());
  return digest;
}

std::uint64_t derive_seed(std::span<const std::uint8_t> key_bytes) {
  if (key_bytes.empty()) fail(ErrorCode::InvalidArgument, "key must not be empty");
  const auto digest = sha256(key_bytes);
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | digest[i];
  return seed;
}

std::uint64_t derive_seed(const EmbeddingKey& key) { return derive_seed(key.key_bytes); }
std::uint64_t derive_seed(const ShuffleKey& key) { return derive_seed(key.key_bytes); }

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

std::vector<Dims> NoisePyramid::dims() const {
  std::vector<Dims> out;
  for (const auto& m : maps) out.push_back(m.dims());
  return out;
}

NoisePyramid noise_pyramid(std::uint64_t seed, std::span<const Dims> dims, NoiseStream stream,
                           std::uint32_t substream) {
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed),
                                         static_cast<std::uint32_t>(seed >> 32)};
  NoisePyramid pyr;
  pyr.maps.resize(dims.size());
  for (std::size_t n = 0; n < dims.size(); ++n) {
    if (dims[n].height < 1 || dims[n].width < 1) fail(ErrorCode::InvalidArgument, "noise_pyramid: empty level");
    pyr.maps[n] = Tensor(1, dims[n].height, dims[n].width);
  }
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  std::uint64_t element = 0;
  std::array<double, 2> pair{};
  for (std::size_t level = dims.size(); level-- > 0;) {
    for (float& out : pyr.maps[level].data) {
      if (element % 2 == 0) {
        const std::uint64_t j = element / 2;
        const auto w = philox4x32({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(j >> 32), substream,
                                   static_cast<std::uint32_t>(stream)},
                                  key);
        const std::uint64_t a = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
        const double u1 = static_cast<double>((a >> 11) + 1) * kInv53;
        const double u2 = static_cast<double>(b >> 11) * kInv53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        pair = {r * std::cos(kTwoPi * u2), r * std::sin(kTwoPi * u2)};
      }
      out = static_cast<float>(pair[element % 2]);
      ++element;
    }
  }
  return pyr;
}

NoisePyramid noise_pyramid(const EmbeddingKey& key, std::span<const Dims> dims) {
  if (key.scheme_id != kNoiseScheme) {
    fail(ErrorCode::SchemeMismatch, "unsupported noise scheme '" + key.scheme_id + "'");
  }
  return noise_pyramid(derive_seed(key), dims, NoiseStream::Keyed);
}

namespace {

class WordStream {
 public:
  explicit WordStream(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  std::uint32_t next() {
    if (used_ == 4) {
      block_ = philox4x32({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0,
                           static_cast<std::uint32_t>(NoiseStream::Permutation)},
                          key_);
      ++counter_;
      used_ = 0;
    }
    return block_[used_++];
  }

  // Uniform in [0, bound).
  std::uint32_t below(std::uint64_t bound) {
    const std::uint64_t range = 1ull << 32;
    const std::uint64_t limit = range - range % bound;
    for (;;) {
      const std::uint64_t x = next();
      if (x < limit) return static_cast<std::uint32_t>(x % bound);
    }
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> block_{};
  std::uint64_t counter_ = 0;
  int used_ = 4;
};

void check_perm(const ImageU8& img, std::span<const std::uint32_t> perm) {
  if (perm.size() != static_cast<std::size_t>(img.height) * img.width) {
    fail(ErrorCode::DimensionMismatch, "permutation length " + std::to_string(perm.size()) +
                                           " does not match pixel count " +
                                           std::to_string(static_cast<std::size_t>(img.height) * img.width));
  }
}

}  // namespace

std::vector<std::uint32_t> shuffle_permutation(const ShuffleKey& key, std::size_t n) {
  if (key.scheme_id != kShuffleScheme) {
    fail(ErrorCode::SchemeMismatch, "unsupported shuffle scheme '" + key.scheme_id + "'");
  }
  if (n == 0) fail(ErrorCode::InvalidArgument, "shuffle_permutation: n must be >= 1");
  if (n > 0xFFFFFFFFull) fail(ErrorCode::InvalidArgument, "shuffle_permutation: n too large");
  std::vector<std::uint32_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
  WordStream words(derive_seed(key));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::uint32_t j = words.below(i + 1);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

std::vector<std::uint32_t> invert_permutation(std::span<const std::uint32_t> perm) {
  std::vector<std::uint32_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<std::uint32_t>(i);
  return inv;
}

ImageU8 shuffle_image(const ImageU8& img, std::span<const std::uint32_t> perm) {
  check_perm(img, perm);
  ImageU8 out(img.height, img.width);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = img.data[static_cast<std::size_t>(perm[i]) * 3 + c];
  }
  return out;
}

ImageU8 unshuffle_image(const ImageU8& img, std::span<const std::uint32_t> perm) {
  check_perm(img, perm);
  ImageU8 out(img.height, img.width);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (int c = 0; c < 3; ++c) out.data[static_cast<std::size_t>(perm[i]) * 3 + c] = img.data[i * 3 + c];
  }
  return out;
}

}  // namespace stegan
