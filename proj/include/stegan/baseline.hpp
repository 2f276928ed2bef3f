#pragma once

#include "stegan/image.hpp"

namespace stegan {

// Replace the four low bit planes of the cover with the four high bit planes
// of the secret: stego = (cover & 0xF0) | (secret >> 4).
ImageU8 lsb_hide(const ImageU8& cover, const ImageU8& secret);

// Recover the secret's high nibble and fill the lost nibble with its
// midpoint: ((stego & 0x0F) << 4) | 0x08.
ImageU8 lsb_extract(const ImageU8& stego);

}  // namespace stegan
