#pragma once

#include <filesystem>

#include "stegan/image.hpp"

namespace stegan {

// Lossless RGB PNG I/O. Grey, palette and alpha inputs are converted to RGB
// (alpha dropped); 16-bit inputs are reduced to 8 bits. Throws Error(Io).
ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& img);

// True if the extension names a lossless format this tool can write (.png).
bool is_lossless_extension(const std::filesystem::path& path);

}  // namespace stegan
