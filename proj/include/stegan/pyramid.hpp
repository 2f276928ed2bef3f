#pragma once

#include <vector>

#include "stegan/image.hpp"

namespace stegan {

// Multi-scale ladder. levels[n] is scale n: levels[0] is the source image,
// levels[stage_count() - 1] the coarsest.
struct ImagePyramid {
  std::vector<ImageF> levels;
  double ratio = 1.0;

  int stage_count() const { return static_cast<int>(levels.size()); }
  int coarsest() const { return stage_count() - 1; }
  std::vector<Dims> dims() const;
};

// Geometric schedule of level sizes, indexed by scale (0 = finest). The
// shorter side of level n is
//   round(coarsest_min_dim * (min_dim / coarsest_min_dim)^((N - n) / N))
// and the longer side keeps the aspect ratio. Level 0 is (height, width).
std::vector<Dims> pyramid_dims(int height, int width, int stage_count, int coarsest_min_dim);

ImagePyramid build_pyramid(const ImageF& img, int stage_count, int coarsest_min_dim);

}  // namespace stegan
