#pragma once

#include <cstdint>
#include <vector>

#include "stegan/tensor.hpp"

namespace stegan {

// 8-bit RGB image, interleaved row-major (H, W, 3).
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  static constexpr int kChannels = 3;

  ImageU8() = default;
  ImageU8(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * kChannels, fill) {}

  Dims dims() const { return {height, width}; }
  std::uint8_t& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  friend bool operator==(const ImageU8&, const ImageU8&) = default;
};

// Float RGB image in [-1, 1], stored as a 3-channel Tensor.
using ImageF = Tensor;

// [-1, 1] -> [0, 255], round half away from zero, clamp. Throws on NaN/inf.
ImageU8 quantize(const ImageF& img);

// [0, 255] -> [-1, 1].
ImageF dequantize(const ImageU8& img);

// Resample every channel to (height, width) with a triangle (bilinear)
// kernel, half-pixel centres and edge clamping. On downscale the kernel is
// widened by the scale factor so the result is anti-aliased. No clamping.
Tensor resample(const Tensor& src, int height, int width);

// Adjoint of resample: maps a gradient w.r.t. the resampled tensor back to
// the source grid.
Tensor resample_backward(const Tensor& grad, int src_height, int src_width);

// resample() followed by clamping to [-1, 1].
ImageF resize(const ImageF& img, int height, int width);

ImageU8 resize(const ImageU8& img, int height, int width);

}  // namespace stegan
