#include "stegan/image.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "stegan/error.hpp"

namespace stegan {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::Io: return "io";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::UnsupportedVersion: return "unsupported-version";
    case ErrorCode::ChecksumMismatch: return "checksum-mismatch";
    case ErrorCode::Malformed: return "malformed";
    case ErrorCode::SchemeMismatch: return "scheme-mismatch";
    case ErrorCode::DuplicateKey: return "duplicate-key";
  }
  return "unknown";
}

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

double mean_squared_error(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) fail(ErrorCode::DimensionMismatch, "mean_squared_error: shape mismatch");
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

ImageU8 quantize(const ImageF& img) {
  if (img.channels != 3) fail(ErrorCode::InvalidArgument, "quantize: expected 3 channels");
  if (!all_finite(img.data)) fail(ErrorCode::NonFinite, "quantize: non-finite pixel value");
  ImageU8 out(img.height, img.width);
  for (int c = 0; c < 3; ++c) {
    const float* src = img.channel(c);
    for (int i = 0; i < img.height * img.width; ++i) {
      const double v = std::round((static_cast<double>(src[i]) + 1.0) * 127.5);
      out.data[static_cast<std::size_t>(i) * 3 + c] =
          static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return out;
}

ImageF dequantize(const ImageU8& img) {
  ImageF out(3, img.height, img.width);
  for (int c = 0; c < 3; ++c) {
    float* dst = out.channel(c);
    for (int i = 0; i < img.height * img.width; ++i) {
      dst[i] = static_cast<float>(img.data[static_cast<std::size_t>(i) * 3 + c] / 127.5 - 1.0);
    }
  }
  return out;
}

namespace {

// Per-output-index tap list for one axis.
struct AxisTaps {
  int max_taps = 0;
  std::vector<int> first;
  std::vector<int> count;
  std::vector<float> weights;  // out * max_taps
};

AxisTaps compute_taps(int in, int out) {
  AxisTaps t;
  const double scale = static_cast<double>(in) / out;
  const double filter_scale = std::max(scale, 1.0);
  const double support = filter_scale;
  t.max_taps = static_cast<int>(std::ceil(support)) * 2 + 1;
  t.first.resize(out);
  t.count.resize(out);
  t.weights.assign(static_cast<std::size_t>(out) * t.max_taps, 0.0f);
  std::vector<double> w(t.max_taps);
  for (int i = 0; i < out; ++i) {
    const double center = (i + 0.5) * scale;
    int lo = static_cast<int>(center - support + 0.5);
    int hi = static_cast<int>(center + support + 0.5);
    lo = std::max(lo, 0);
    hi = std::min(hi, in);
    int n = hi - lo;
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
      const double x = std::abs((k + lo - center + 0.5) / filter_scale);
      w[k] = x < 1.0 ? 1.0 - x : 0.0;
      total += w[k];
    }
    // Trim zero-weight taps at both ends.
    int skip = 0;
    while (skip < n && w[skip] == 0.0) ++skip;
    while (n > skip && w[n - 1] == 0.0) --n;
    t.first[i] = lo + skip;
    t.count[i] = n - skip;
    for (int k = skip; k < n; ++k) {
      t.weights[static_cast<std::size_t>(i) * t.max_taps + (k - skip)] =
          static_cast<float>(w[k] / total);
    }
  }
  return t;
}

const AxisTaps& taps_for(int in, int out) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, AxisTaps> cache;
  std::lock_guard lock(mu);
  auto it = cache.find({in, out});
  if (it == cache.end()) it = cache.emplace(std::pair{in, out}, compute_taps(in, out)).first;
  return it->second;
}

void check_target(int height, int width) {
  if (height < 1 || width < 1) {
    fail(ErrorCode::InvalidArgument,
         "resize: target dims must be >= 1, got " + std::to_string(height) + "x" + std::to_string(width));
  }
}

}  // namespace

Tensor resample(const Tensor& src, int height, int width) {
  check_target(height, width);
  if (src.height == height && src.width == width) return src;
  const AxisTaps& tx = taps_for(src.width, width);
  const AxisTaps& ty = taps_for(src.height, height);
  Tensor out(src.channels, height, width);
  std::vector<float> rows(static_cast<std::size_t>(src.height) * width);
  for (int c = 0; c < src.channels; ++c) {
    const float* in = src.channel(c);
    for (int y = 0; y < src.height; ++y) {
      const float* line = in + static_cast<std::size_t>(y) * src.width;
      float* dst = rows.data() + static_cast<std::size_t>(y) * width;
      for (int x = 0; x < width; ++x) {
        const float* w = tx.weights.data() + static_cast<std::size_t>(x) * tx.max_taps;
        const float* s = line + tx.first[x];
        float acc = 0.0f;
        for (int k = 0; k < tx.count[x]; ++k) acc += w[k] * s[k];
        dst[x] = acc;
      }
    }
    float* o = out.channel(c);
    for (int y = 0; y < height; ++y) {
      const float* w = ty.weights.data() + static_cast<std::size_t>(y) * ty.max_taps;
      float* dst = o + static_cast<std::size_t>(y) * width;
      std::fill_n(dst, width, 0.0f);
      for (int k = 0; k < ty.count[y]; ++k) {
        const float* s = rows.data() + static_cast<std::size_t>(ty.first[y] + k) * width;
        for (int x = 0; x < width; ++x) dst[x] += w[k] * s[x];
      }
    }
  }
  return out;
}

Tensor resample_backward(const Tensor& grad, int src_height, int src_width) {
  check_target(src_height, src_width);
  if (grad.height == src_height && grad.width == src_width) return grad;
  const AxisTaps& tx = taps_for(src_width, grad.width);
  const AxisTaps& ty = taps_for(src_height, grad.height);
  Tensor out(grad.channels, src_height, src_width);
  std::vector<float> rows(static_cast<std::size_t>(src_height) * grad.width);
  for (int c = 0; c < grad.channels; ++c) {
    std::fill(rows.begin(), rows.end(), 0.0f);
    const float* g = grad.channel(c);
    for (int y = 0; y < grad.height; ++y) {
      const float* w = ty.weights.data() + static_cast<std::size_t>(y) * ty.max_taps;
      const float* s = g + static_cast<std::size_t>(y) * grad.width;
      for (int k = 0; k < ty.count[y]; ++k) {
        float* d = rows.data() + static_cast<std::size_t>(ty.first[y] + k) * grad.width;
        for (int x = 0; x < grad.width; ++x) d[x] += w[k] * s[x];
      }
    }
    float* o = out.channel(c);
    for (int y = 0; y < src_height; ++y) {
      const float* s = rows.data() + static_cast<std::size_t>(y) * grad.width;
      float* d = o + static_cast<std::size_t>(y) * src_width;
      for (int x = 0; x < grad.width; ++x) {
        const float* w = tx.weights.data() + static_cast<std::size_t>(x) * tx.max_taps;
        for (int k = 0; k < tx.count[x]; ++k) d[tx.first[x] + k] += w[k] * s[x];
      }
    }
  }
  return out;
}

ImageF resize(const ImageF& img, int height, int width) {
  Tensor out = resample(img, height, width);
  for (float& v : out.data) v = std::clamp(v, -1.0f, 1.0f);
  return out;
}

ImageU8 resize(const ImageU8& img, int height, int width) {
  if (img.height == height && img.width == width) return img;
  return quantize(resize(dequantize(img), height, width));
}

}  // namespace stegan
