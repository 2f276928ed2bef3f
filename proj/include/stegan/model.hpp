#pragma once

#include <string>

#include "stegan/keynoise.hpp"
#include "stegan/nn/generator.hpp"

namespace stegan {

// The publicly shareable artifact: a trained multi-scale generator plus the
// metadata a receiver needs to regenerate keyed noise and route extraction.
struct StegoModel {
  nn::Generator generator;
  double ratio = 1.0;
  std::string noise_scheme{kNoiseScheme};
  bool obfuscated = false;
  std::string shuffle_scheme;  // empty unless obfuscated

  Dims image_dims() const { return generator.dims().front(); }
};

}  // namespace stegan
