#include "stegan/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stegan/error.hpp"

namespace stegan {

std::vector<Dims> ImagePyramid::dims() const {
  std::vector<Dims> out;
  out.reserve(levels.size());
  for (const auto& l : levels) out.push_back(l.dims());
  return out;
}

std::vector<Dims> pyramid_dims(int height, int width, int stage_count, int coarsest_min_dim) {
  if (stage_count < 1) fail(ErrorCode::InvalidArgument, "pyramid: stage_count must be >= 1");
  if (coarsest_min_dim < 1) fail(ErrorCode::InvalidArgument, "pyramid: coarsest_min_dim must be >= 1");
  const int min_side = std::min(height, width);
  if (min_side < coarsest_min_dim) {
    fail(ErrorCode::InvalidArgument, "pyramid: image " + std::to_string(height) + "x" +
                                         std::to_string(width) + " is smaller than coarsest_min_dim " +
                                         std::to_string(coarsest_min_dim));
  }
  const int last = stage_count - 1;
  std::vector<Dims> dims(stage_count);
  dims[0] = {height, width};
  const double span = static_cast<double>(min_side) / coarsest_min_dim;
  for (int n = 1; n <= last; ++n) {
    const double t = static_cast<double>(last - n) / last;
    const double level_min = coarsest_min_dim * std::pow(span, t);
    const double scale = level_min / min_side;
    dims[n] = {static_cast<int>(std::lround(height * scale)), static_cast<int>(std::lround(width * scale))};
  }
  for (int n = 1; n <= last; ++n) {
    if (dims[n].height >= dims[n - 1].height || dims[n].width >= dims[n - 1].width) {
      fail(ErrorCode::InvalidArgument,
           "pyramid: schedule is not strictly decreasing at level " + std::to_string(n) +
               "; use fewer stages or a smaller coarsest_min_dim");
    }
  }
  return dims;
}

ImagePyramid build_pyramid(const ImageF& img, int stage_count, int coarsest_min_dim) {
  const auto dims = pyramid_dims(img.height, img.width, stage_count, coarsest_min_dim);
  ImagePyramid pyr;
  pyr.levels.reserve(dims.size());
  pyr.levels.push_back(img);
  for (std::size_t n = 1; n < dims.size(); ++n) {
    pyr.levels.push_back(resize(img, dims[n].height, dims[n].width));
  }
  const int last = stage_count - 1;
  pyr.ratio = last == 0 ? 1.0
                        : std::pow(static_cast<double>(std::min(img.height, img.width)) / coarsest_min_dim,
                                   1.0 / last);
  return pyr;
}

}  // namespace stegan
