#include "stegan/baseline.hpp"

#include "stegan/error.hpp"

namespace stegan {

ImageU8 lsb_hide(const ImageU8& cover, const ImageU8& secret) {
  if (cover.dims() != secret.dims()) fail(ErrorCode::DimensionMismatch, "lsb_hide: cover and secret dims differ");
  ImageU8 out(cover.height, cover.width);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>((cover.data[i] & 0xF0) | (secret.data[i] >> 4));
  }
  return out;
}

ImageU8 lsb_extract(const ImageU8& stego) {
  ImageU8 out(stego.height, stego.width);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<std::uint8_t>(((stego.data[i] & 0x0F) << 4) | 0x08);
  }
  return out;
}

}  // namespace stegan
