#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stegan {

struct Dims {
  int height = 0;
  int width = 0;

  int area() const { return height * width; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// Dense channel-major (C, H, W) float tensor; batch size is always one.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  Dims dims() const { return {height, width}; }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }

  float* channel(int c) { return data.data() + c * plane(); }
  const float* channel(int c) const { return data.data() + c * plane(); }

  float& at(int c, int y, int x) { return data[(c * plane()) + y * width + x]; }
  float at(int c, int y, int x) const { return data[(c * plane()) + y * width + x]; }

  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

bool all_finite(std::span<const float> values);

// Mean squared difference; shapes must match.
double mean_squared_error(const Tensor& a, const Tensor& b);

}  // namespace stegan
